#include "icebench/models.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "icebench/error.hpp"
#include "icebench/jsonio.hpp"
#include "icebench/kernels.hpp"
#include "icebench/rng.hpp"

namespace icebench {

const char* model_kind_name(ModelKind k) {
  return k == ModelKind::patch ? "patch" : "pixel";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "patch") return ModelKind::patch;
  if (name == "pixel") return ModelKind::pixel;
  fail(Err::InvalidArgument, "unknown model kind '" + name + "'");
}

// ---------------------------------------------------------------------------
// model file format
//
// "ICBM" | u16 version | u16 kind | u16 n_classes | u32 feature_dim |
// f64 weights row-major | f64 biases. Little endian throughout; corruption is
// caught by magic, version and exact payload length.

namespace {

constexpr char kModelMagic[4] = {'I', 'C', 'B', 'M'};
constexpr uint16_t kModelVersion = 1;

template <typename T>
void put_le(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <typename T>
T get_le(const std::string& buf, size_t& off) {
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void save_model(const ModelState& state, const std::string& path) {
  if (!state.trained) fail(Err::UntrainedModel, "refusing to persist an untrained model");
  if (state.feature_dim < 1 || state.n_classes < 2)
    fail(Err::InvalidArgument, "model dimensions are degenerate");
  const size_t nw = static_cast<size_t>(state.n_classes) * state.feature_dim;
  if (state.weights.size() != nw || state.bias.size() != static_cast<size_t>(state.n_classes))
    fail(Err::ShapeMismatch, "model parameter buffers do not match declared dims");

  std::string buf;
  buf.reserve(14 + (nw + state.n_classes) * sizeof(double));
  buf.append(kModelMagic, 4);
  put_le<uint16_t>(buf, kModelVersion);
  put_le<uint16_t>(buf, state.kind == ModelKind::patch ? 0 : 1);
  put_le<uint16_t>(buf, static_cast<uint16_t>(state.n_classes));
  put_le<uint32_t>(buf, static_cast<uint32_t>(state.feature_dim));
  for (double w : state.weights) put_le<double>(buf, w);
  for (double b : state.bias) put_le<double>(buf, b);
  write_bytes(path, buf.data(), buf.size());
}

ModelState load_model(const std::string& path) {
  const std::string buf = read_text_file(path);
  if (buf.size() < 14 || std::memcmp(buf.data(), kModelMagic, 4) != 0)
    fail(Err::CorruptPayload, "not a model file: " + path);
  size_t off = 4;
  const uint16_t version = get_le<uint16_t>(buf, off);
  if (version != kModelVersion)
    fail(Err::VersionMismatch,
         "model version " + std::to_string(version) + " unsupported: " + path);
  const uint16_t kind_code = get_le<uint16_t>(buf, off);
  if (kind_code > 1) fail(Err::CorruptPayload, "bad model kind field: " + path);
  ModelState state;
  state.kind = kind_code == 0 ? ModelKind::patch : ModelKind::pixel;
  state.n_classes = get_le<uint16_t>(buf, off);
  state.feature_dim = static_cast<int>(get_le<uint32_t>(buf, off));
  if (state.n_classes < 2 || state.feature_dim < 1)
    fail(Err::CorruptPayload, "model header carries degenerate dims: " + path);
  const size_t nw = static_cast<size_t>(state.n_classes) * state.feature_dim;
  const size_t expect = 14 + (nw + state.n_classes) * sizeof(double);
  if (buf.size() != expect)
    fail(Err::CorruptPayload, "model payload is " + std::to_string(buf.size()) + " bytes, want " +
                                  std::to_string(expect) + ": " + path);
  state.weights.resize(nw);
  state.bias.resize(state.n_classes);
  for (size_t i = 0; i < nw; ++i) state.weights[i] = get_le<double>(buf, off);
  for (int c = 0; c < state.n_classes; ++c) state.bias[c] = get_le<double>(buf, off);
  state.trained = true;
  return state;
}

// ---------------------------------------------------------------------------
// feature assembly

namespace {

bool try_patch_features(const FeatureStack& stack, int r0, int c0, int size,
                        std::vector<double>* out, std::string* bad_channel) {
  if (size < 1 || r0 < 0 || c0 < 0 || r0 + size > stack.height || c0 + size > stack.width)
    fail(Err::InvalidArgument, "patch window leaves the stack");
  out->resize(stack.channels.size() * 2);
  for (size_t c = 0; c < stack.channels.size(); ++c) {
    const Raster<float>& ch = stack.channels[c];
    kernels::Moments m = kernels::window_moments_f32(ch.row(r0) + c0, ch.width(), size, size);
    if (m.finite == 0) {
      if (bad_channel) *bad_channel = stack.names[c];
      return false;
    }
    const double mean = m.sum / static_cast<double>(m.finite);
    double var = m.sum_sq / static_cast<double>(m.finite) - mean * mean;
    if (var < 0.0) var = 0.0;
    (*out)[2 * c] = mean;
    (*out)[2 * c + 1] = std::sqrt(var);
  }
  return true;
}

}  // namespace

std::vector<double> patch_features(const FeatureStack& stack, int r0, int c0, int size) {
  std::vector<double> out;
  std::string bad;
  if (!try_patch_features(stack, r0, c0, size, &out, &bad))
    fail(Err::EmptySupport, "channel '" + bad + "' has no finite pixel in the window");
  return out;
}

FeatureStack box3_stack(const FeatureStack& stack) {
  FeatureStack out;
  out.names = stack.names;
  out.height = stack.height;
  out.width = stack.width;
  out.channels.reserve(stack.channels.size());
  for (const auto& ch : stack.channels) {
    Raster<float> smooth(ch.height(), ch.width());
    kernels::box3_mean_f32(ch.data(), ch.height(), ch.width(), smooth.data());
    out.channels.push_back(std::move(smooth));
  }
  return out;
}

int pixel_feature_dim(const FeatureStack& stack) {
  return static_cast<int>(stack.channels.size()) * 2;
}

void pixel_features_at(const FeatureStack& stack, const FeatureStack& box3, int r, int c,
                       double* out) {
  const size_t n = stack.channels.size();
  for (size_t k = 0; k < n; ++k) {
    out[k] = stack.channels[k].at(r, c);
    out[n + k] = box3.channels[k].at(r, c);
  }
}

// ---------------------------------------------------------------------------
// softmax core

namespace {

// Numerically stable softmax from logits already in probs[].
void softmax_inplace(double* probs, int n) {
  double hi = probs[0];
  for (int k = 1; k < n; ++k) hi = std::max(hi, probs[k]);
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    probs[k] = std::exp(probs[k] - hi);
    sum += probs[k];
  }
  for (int k = 0; k < n; ++k) probs[k] /= sum;
}

// Adds one sample's unscaled CE gradient; returns its loss.
double accumulate_sample(const double* w, const double* b, int nc, int dim, const double* x,
                         int y, double* probs, double* gw, double* gb) {
  kernels::affine_f64(w, b, x, nc, dim, probs);
  softmax_inplace(probs, nc);
  const double p = std::max(probs[y], 1e-300);
  if (gw) {
    for (int k = 0; k < nc; ++k) {
      const double d = probs[k] - (k == y ? 1.0 : 0.0);
      kernels::axpy_f64(d, x, gw + static_cast<size_t>(k) * dim, static_cast<size_t>(dim));
      gb[k] += d;
    }
  }
  return -std::log(p);
}

}  // namespace

double ce_loss_and_grad(const std::vector<double>& weights, const std::vector<double>& bias,
                        int n_classes, int dim, const PatchSample* samples, size_t n,
                        std::vector<double>* grad_w, std::vector<double>* grad_b) {
  if (n == 0) fail(Err::EmptySupport, "loss over zero samples");
  if (static_cast<bool>(grad_w) != static_cast<bool>(grad_b))
    fail(Err::InvalidArgument, "gradients come as a pair");
  if (grad_w) {
    grad_w->assign(static_cast<size_t>(n_classes) * dim, 0.0);
    grad_b->assign(n_classes, 0.0);
  }
  std::vector<double> probs(n_classes);
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const PatchSample& s = samples[i];
    if (s.label >= n_classes) fail(Err::DomainError, "training label out of range");
    if (static_cast<int>(s.features.size()) != dim)
      fail(Err::ShapeMismatch, "feature vector dim mismatch");
    loss += accumulate_sample(weights.data(), bias.data(), n_classes, dim, s.features.data(),
                              s.label, probs.data(), grad_w ? grad_w->data() : nullptr,
                              grad_b ? grad_b->data() : nullptr);
  }
  const double inv = 1.0 / static_cast<double>(n);
  if (grad_w) {
    for (double& g : *grad_w) g *= inv;
    for (double& g : *grad_b) g *= inv;
  }
  return loss * inv;
}

void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) fail(Err::ConfigError, "learning_rate must be positive");
  if (cfg.batch_size < 1) fail(Err::ConfigError, "batch_size must be at least 1");
  if (cfg.max_epochs < 1) fail(Err::ConfigError, "max_epochs must be at least 1");
  if (cfg.patience < 1) fail(Err::ConfigError, "patience must be at least 1");
  if (!(cfg.improvement_tolerance >= 0.0))
    fail(Err::ConfigError, "improvement_tolerance must be non-negative");
  if (cfg.epoch_steps < 1) fail(Err::ConfigError, "epoch_steps must be at least 1");
}

void save_training_log(const std::vector<EpochLog>& log, const std::string& path) {
  std::string buf;
  for (const EpochLog& e : log) {
    json line{{"epoch", e.epoch},
              {"train_loss", e.train_loss},
              {"val_loss", e.val_loss},
              {"wall_seconds", e.wall_seconds}};
    buf += line.dump();
    buf += '\n';
  }
  write_text_file(path, buf);
}

// ---------------------------------------------------------------------------
// training loop

namespace {

struct LoopState {
  ModelState model;
  FitResult result;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  int since_improve = 0;

  double wall() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  // Returns true while training should continue.
  bool record_epoch(int epoch, double train_loss, double val_loss, const TrainConfig& cfg) {
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
      fail(Err::NonFiniteLoss, "loss diverged at epoch " + std::to_string(epoch));
    result.log.push_back({epoch, train_loss, val_loss, wall()});
    if (!cfg.log_path.empty()) save_training_log(result.log, cfg.log_path);
    result.epochs_run = epoch;
    if (val_loss < result.best_val_loss - cfg.improvement_tolerance) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.state = model;
      since_improve = 0;
    } else {
      ++since_improve;
      if (since_improve >= cfg.patience) return false;
    }
    return epoch < cfg.max_epochs;
  }

  FitResult finish() {
    result.state.trained = true;
    return std::move(result);
  }
};

ModelState fresh_model(ModelKind kind, int dim) {
  ModelState m;
  m.kind = kind;
  m.feature_dim = dim;
  m.weights.assign(static_cast<size_t>(m.n_classes) * dim, 0.0);
  m.bias.assign(m.n_classes, 0.0);
  return m;
}

// Degenerate training set: bias spike makes the lone class near-certain.
FitResult constant_predictor(ModelKind kind, int dim, int the_class, double val_loss) {
  FitResult res;
  res.state = fresh_model(kind, dim);
  res.state.bias[the_class] = 30.0;
  res.state.trained = true;
  res.single_class = true;
  res.best_epoch = 1;
  res.best_val_loss = val_loss;
  res.epochs_run = 1;
  res.log.push_back({1, 0.0, val_loss, 0.0});
  return res;
}

double constant_val_loss(int the_class, const std::vector<PatchSample>& val) {
  // softmax with one bias at 30: p(class) = e^30/(e^30+5), matches runtime exactly.
  std::vector<double> probs(kNumClasses, 0.0);
  double loss = 0.0;
  for (const PatchSample& s : val) {
    std::fill(probs.begin(), probs.end(), 0.0);
    probs[the_class] = 30.0;
    softmax_inplace(probs.data(), kNumClasses);
    loss += -std::log(std::max(probs[s.label], 1e-300));
  }
  return val.empty() ? 0.0 : loss / static_cast<double>(val.size());
}

}  // namespace

FitResult fit_patch(const PatchSampleSource& train, const std::vector<PatchSample>& val,
                    const TrainConfig& cfg) {
  validate_train_config(cfg);
  const size_t n = train.size();
  if (n == 0) fail(Err::EmptySupport, "training set is empty");
  if (val.empty()) fail(Err::EmptySupport, "validation set is empty");
  for (const PatchSample& s : val)
    if (s.label >= kNumClasses) fail(Err::DomainError, "validation label out of range");

  std::set<uint8_t> classes;
  for (size_t i = 0; i < n; ++i) {
    const uint8_t y = train.label(i);
    if (y >= kNumClasses) fail(Err::DomainError, "training label out of range");
    classes.insert(y);
  }

  PatchSample probe;
  train.materialize(0, 1, probe);
  const int dim = static_cast<int>(probe.features.size());
  if (dim < 1) fail(Err::ShapeMismatch, "empty feature vectors");

  if (classes.size() == 1) {
    FitResult res = constant_predictor(ModelKind::patch, dim, *classes.begin(),
                                       constant_val_loss(*classes.begin(), val));
    if (!cfg.log_path.empty()) save_training_log(res.log, cfg.log_path);
    return res;
  }

  LoopState loop;
  loop.model = fresh_model(ModelKind::patch, dim);

  std::vector<size_t> order(n);
  std::vector<PatchSample> batch(std::min<size_t>(cfg.batch_size, n));
  std::vector<double> gw, gb;
  for (int epoch = 1;; ++epoch) {
    for (size_t i = 0; i < n; ++i) order[i] = i;
    keyed_shuffle(order, derive_key({cfg.seed, fnv1a("epoch_order"), static_cast<uint64_t>(epoch)}));

    double loss_sum = 0.0;
    size_t seen = 0;
    for (size_t at = 0; at < n; at += cfg.batch_size) {
      const size_t bn = std::min<size_t>(cfg.batch_size, n - at);
      for (size_t b = 0; b < bn; ++b) train.materialize(order[at + b], epoch, batch[b]);
      const double batch_loss = ce_loss_and_grad(loop.model.weights, loop.model.bias,
                                                 loop.model.n_classes, dim, batch.data(), bn,
                                                 &gw, &gb);
      kernels::axpy_f64(-cfg.learning_rate, gw.data(), loop.model.weights.data(), gw.size());
      kernels::axpy_f64(-cfg.learning_rate, gb.data(), loop.model.bias.data(), gb.size());
      loss_sum += batch_loss * static_cast<double>(bn);
      seen += bn;
    }

    const double train_loss = loss_sum / static_cast<double>(seen);
    const double val_loss = ce_loss_and_grad(loop.model.weights, loop.model.bias,
                                             loop.model.n_classes, dim, val.data(), val.size(),
                                             nullptr, nullptr);
    if (!loop.record_epoch(epoch, train_loss, val_loss, cfg)) break;
  }
  return loop.finish();
}

FitResult fit_patch(const std::vector<PatchSample>& train, const std::vector<PatchSample>& val,
                    const TrainConfig& cfg) {
  return fit_patch(VectorSampleSource(train), val, cfg);
}

// ---------------------------------------------------------------------------
// pixel trainer

namespace {

struct PixelBatchAccum {
  std::vector<double> gw, gb, probs, x;
  double loss_sum = 0.0;
  size_t count = 0;

  void reset(int nc, int dim) {
    gw.assign(static_cast<size_t>(nc) * dim, 0.0);
    gb.assign(nc, 0.0);
    probs.resize(nc);
    x.resize(dim);
    loss_sum = 0.0;
    count = 0;
  }

  void add_crop(const ModelState& m, const Crop& crop) {
    const FeatureStack smooth = box3_stack(crop.features);
    const size_t nch = crop.features.channels.size();
    for (int r = 0; r < crop.size; ++r) {
      for (int c = 0; c < crop.size; ++c) {
        const uint8_t y = crop.labels.at(r, c);
        if (y >= kNumClasses) continue;
        bool finite = true;
        for (size_t k = 0; k < nch && finite; ++k) {
          x[k] = crop.features.channels[k].at(r, c);
          x[nch + k] = smooth.channels[k].at(r, c);
          finite = std::isfinite(x[k]) && std::isfinite(x[nch + k]);
        }
        if (!finite) continue;
        loss_sum += accumulate_sample(m.weights.data(), m.bias.data(), m.n_classes,
                                      m.feature_dim, x.data(), y, probs.data(), gw.data(),
                                      gb.data());
        ++count;
      }
    }
  }

  // Mean-gradient step; empty batches are skipped by the caller.
  void apply(ModelState& m, double lr) {
    const double scale = -lr / static_cast<double>(count);
    kernels::axpy_f64(scale, gw.data(), m.weights.data(), gw.size());
    kernels::axpy_f64(scale, gb.data(), m.bias.data(), gb.size());
  }
};

double pixel_val_loss(const ModelState& m, const std::vector<PreparedScene>& val,
                      const std::vector<FeatureStack>& val_smooth) {
  std::vector<double> probs(m.n_classes), x(m.feature_dim);
  double loss = 0.0;
  size_t count = 0;
  for (size_t s = 0; s < val.size(); ++s) {
    const FeatureStack& stack = val[s].features;
    const size_t nch = stack.channels.size();
    for (int r = 0; r < stack.height; ++r) {
      for (int c = 0; c < stack.width; ++c) {
        const uint8_t y = val[s].labels.at(r, c);
        if (y >= kNumClasses) continue;
        bool finite = true;
        for (size_t k = 0; k < nch && finite; ++k) {
          x[k] = stack.channels[k].at(r, c);
          x[nch + k] = val_smooth[s].channels[k].at(r, c);
          finite = std::isfinite(x[k]) && std::isfinite(x[nch + k]);
        }
        if (!finite) continue;
        loss += accumulate_sample(m.weights.data(), m.bias.data(), m.n_classes, m.feature_dim,
                                  x.data(), y, probs.data(), nullptr, nullptr);
        ++count;
      }
    }
  }
  if (count == 0) fail(Err::EmptySupport, "validation scenes hold no scoreable pixels");
  return loss / static_cast<double>(count);
}

std::set<uint8_t> scene_classes(const std::vector<PreparedScene>& scenes) {
  std::set<uint8_t> classes;
  for (const PreparedScene& s : scenes) {
    const uint8_t* p = s.labels.data();
    for (size_t i = 0; i < s.labels.size(); ++i)
      if (p[i] < kNumClasses) classes.insert(p[i]);
  }
  return classes;
}

void check_prepared(const std::vector<PreparedScene>& scenes, const char* which) {
  if (scenes.empty()) fail(Err::EmptySupport, std::string(which) + " scene list is empty");
  const size_t nch = scenes.front().features.channels.size();
  for (const PreparedScene& s : scenes) {
    if (s.features.channels.size() != nch)
      fail(Err::ShapeMismatch, "scene " + s.scene_id + " has a different channel count");
    if (s.features.height != s.labels.height() || s.features.width != s.labels.width())
      fail(Err::ShapeMismatch, "scene " + s.scene_id + " labels do not match features");
  }
}

// Shared epoch loop; draw_crop(uid) yields the next crop or nullopt for a
// skipped step slot.
template <typename DrawFn>
FitResult fit_pixel_loop(const std::vector<PreparedScene>& train,
                         const std::vector<PreparedScene>& val, const AugmentationConfig& aug,
                         const TrainConfig& cfg, DrawFn&& draw_crop) {
  validate_train_config(cfg);
  validate_augmentation_config(aug);
  check_prepared(train, "train");
  check_prepared(val, "validation");

  const int dim = pixel_feature_dim(train.front().features);
  std::set<uint8_t> classes = scene_classes(train);
  if (classes.empty()) fail(Err::EmptySupport, "training scenes hold no valid labels");

  std::vector<FeatureStack> val_smooth;
  val_smooth.reserve(val.size());
  for (const PreparedScene& s : val) val_smooth.push_back(box3_stack(s.features));

  if (classes.size() == 1) {
    ModelState probe = fresh_model(ModelKind::pixel, dim);
    probe.bias[*classes.begin()] = 30.0;
    FitResult res = constant_predictor(ModelKind::pixel, dim, *classes.begin(),
                                       pixel_val_loss(probe, val, val_smooth));
    if (!cfg.log_path.empty()) save_training_log(res.log, cfg.log_path);
    return res;
  }

  LoopState loop;
  loop.model = fresh_model(ModelKind::pixel, dim);
  PixelBatchAccum accum;

  for (int epoch = 1;; ++epoch) {
    double loss_sum = 0.0;
    size_t seen = 0;
    for (int step = 0; step < cfg.epoch_steps; ++step) {
      accum.reset(loop.model.n_classes, dim);
      for (int b = 0; b < cfg.batch_size; ++b) {
        const uint64_t uid =
            (static_cast<uint64_t>(epoch - 1) * cfg.epoch_steps + step) * cfg.batch_size + b;
        std::optional<Crop> crop = draw_crop(uid);
        if (!crop) continue;
        if (aug.enabled)
          augment(crop->features, &crop->labels, aug,
                  derive_key({cfg.seed, fnv1a("augment"), uid}));
        accum.add_crop(loop.model, *crop);
      }
      if (accum.count == 0) continue;
      accum.apply(loop.model, cfg.learning_rate);
      loss_sum += accum.loss_sum;
      seen += accum.count;
    }
    if (seen == 0) fail(Err::EmptySupport, "no trainable pixels drawn in an entire epoch");

    const double train_loss = loss_sum / static_cast<double>(seen);
    const double val_loss = pixel_val_loss(loop.model, val, val_smooth);
    if (!loop.record_epoch(epoch, train_loss, val_loss, cfg)) break;
  }
  return loop.finish();
}

}  // namespace

FitResult fit_pixel(const std::vector<PreparedScene>& train,
                    const std::vector<PreparedScene>& val, const SamplingConfig& crop_cfg,
                    const AugmentationConfig& aug, const TrainConfig& cfg) {
  if (crop_cfg.mode != SamplingMode::crop)
    fail(Err::ConfigError, "pixel training samples crops; sampling mode must be 'crop'");
  check_prepared(train, "train");
  std::vector<SceneView> views;
  views.reserve(train.size());
  for (const PreparedScene& s : train)
    views.push_back(SceneView{s.scene_id, &s.features, &s.labels, nullptr});

  return fit_pixel_loop(train, val, aug, cfg, [&](uint64_t uid) -> std::optional<Crop> {
    RngStream pick(derive_key({cfg.seed, fnv1a("crop_scene"), uid}));
    const size_t si = static_cast<size_t>(pick.next_below(views.size()));
    return random_crop(views[si], crop_cfg, uid);
  });
}

FitResult fit_pixel_pool(const std::vector<PreparedScene>& train,
                         const std::vector<PatchRecord>& pool,
                         const std::vector<PreparedScene>& val, const AugmentationConfig& aug,
                         const TrainConfig& cfg) {
  check_prepared(train, "train");
  if (pool.empty()) fail(Err::EmptySupport, "window pool is empty");
  std::map<std::string, const PreparedScene*> by_id;
  for (const PreparedScene& s : train) by_id[s.scene_id] = &s;
  for (const PatchRecord& rec : pool)
    if (!by_id.count(rec.scene_id))
      fail(Err::InvalidArgument, "pool references unknown scene " + rec.scene_id);

  return fit_pixel_loop(train, val, aug, cfg, [&](uint64_t uid) -> std::optional<Crop> {
    RngStream pick(derive_key({cfg.seed, fnv1a("window_pool"), uid}));
    const PatchRecord& rec = pool[pick.next_below(pool.size())];
    const PreparedScene& s = *by_id.at(rec.scene_id);
    SceneView view{s.scene_id, &s.features, &s.labels, nullptr};
    return copy_window(view, rec.row, rec.col, rec.size);
  });
}

// ---------------------------------------------------------------------------
// prediction

void predict_proba(const ModelState& state, const double* x, double* probs) {
  if (!state.trained) fail(Err::UntrainedModel, "predict on an untrained model");
  kernels::affine_f64(state.weights.data(), state.bias.data(), x, state.n_classes,
                      state.feature_dim, probs);
  softmax_inplace(probs, state.n_classes);
}

int predict_class(const ModelState& state, const double* x) {
  if (!state.trained) fail(Err::UntrainedModel, "predict on an untrained model");
  std::vector<double> logits(state.n_classes);
  kernels::affine_f64(state.weights.data(), state.bias.data(), x, state.n_classes,
                      state.feature_dim, logits.data());
  int best = 0;
  for (int k = 1; k < state.n_classes; ++k)
    if (logits[k] > logits[best]) best = k;  // ties keep the smaller index
  return best;
}

uint8_t predict_patch_window(const ModelState& state, const FeatureStack& stack, int r0, int c0,
                             int size) {
  if (!state.trained) fail(Err::UntrainedModel, "predict on an untrained model");
  std::vector<double> x;
  std::string bad;
  if (!try_patch_features(stack, r0, c0, size, &x, &bad)) return kIgnoreLabel;
  if (static_cast<int>(x.size()) != state.feature_dim)
    fail(Err::ShapeMismatch, "stack feature dim does not match the model");
  return static_cast<uint8_t>(predict_class(state, x.data()));
}

LabelRaster predict_pixels(const ModelState& state, const FeatureStack& stack) {
  if (!state.trained) fail(Err::UntrainedModel, "predict on an untrained model");
  if (pixel_feature_dim(stack) != state.feature_dim)
    fail(Err::ShapeMismatch, "stack feature dim does not match the model");
  const FeatureStack smooth = box3_stack(stack);
  LabelRaster pred(stack.height, stack.width, kIgnoreLabel);
  std::vector<double> x(state.feature_dim);
  const size_t nch = stack.channels.size();
  for (int r = 0; r < stack.height; ++r) {
    for (int c = 0; c < stack.width; ++c) {
      bool finite = true;
      for (size_t k = 0; k < nch && finite; ++k) {
        x[k] = stack.channels[k].at(r, c);
        x[nch + k] = smooth.channels[k].at(r, c);
        finite = std::isfinite(x[k]) && std::isfinite(x[nch + k]);
      }
      if (!finite) continue;  // stays 255
      pred.at(r, c) = static_cast<uint8_t>(predict_class(state, x.data()));
    }
  }
  return pred;
}

}  // namespace icebench
