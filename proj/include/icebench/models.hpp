#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "icebench/preprocess.hpp"
#include "icebench/sampling.hpp"
#include "icebench/scene.hpp"

namespace icebench {

enum class ModelKind { patch, pixel };
const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);

// Linear softmax classifier; weights row-major [n_classes x feature_dim].
struct ModelState {
  ModelKind kind = ModelKind::patch;
  int n_classes = kNumClasses;
  int feature_dim = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  bool trained = false;
};

void save_model(const ModelState& state, const std::string& path);
ModelState load_model(const std::string& path);

// Per-channel mean and population std over finite window pixels: dim = 2C,
// layout [mean_0, std_0, mean_1, std_1, ...]. A channel with no finite pixel
// in the window is an EmptySupport error.
std::vector<double> patch_features(const FeatureStack& stack, int r0, int c0, int size);

// Pixel features: raw channel values followed by 3x3 local means, dim = 2C.
FeatureStack box3_stack(const FeatureStack& stack);
void pixel_features_at(const FeatureStack& stack, const FeatureStack& box3, int r, int c,
                       double* out);
int pixel_feature_dim(const FeatureStack& stack);

struct PatchSample {
  std::vector<double> features;
  uint8_t label = kIgnoreLabel;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 16;
  int max_epochs = 500;
  int patience = 30;
  double improvement_tolerance = 1e-6;
  int epoch_steps = 500;  // crop draws per epoch in pixel mode
  uint64_t seed = 0;
  std::string log_path;  // JSONL per-epoch record when non-empty
};

void validate_train_config(const TrainConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;
};

struct FitResult {
  ModelState state;  // snapshot with the lowest validation loss
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int epochs_run = 0;
  bool single_class = false;  // degenerate training set, constant predictor returned
};

// Sample provider so augmented runs can re-materialize features per epoch.
class PatchSampleSource {
 public:
  virtual ~PatchSampleSource() = default;
  virtual size_t size() const = 0;
  virtual uint8_t label(size_t i) const = 0;
  virtual void materialize(size_t i, int epoch, PatchSample& out) const = 0;
};

class VectorSampleSource final : public PatchSampleSource {
 public:
  explicit VectorSampleSource(std::vector<PatchSample> samples)
      : samples_(std::move(samples)) {}
  size_t size() const override { return samples_.size(); }
  uint8_t label(size_t i) const override { return samples_[i].label; }
  void materialize(size_t i, int /*epoch*/, PatchSample& out) const override {
    out = samples_[i];
  }

 private:
  std::vector<PatchSample> samples_;
};

FitResult fit_patch(const PatchSampleSource& train, const std::vector<PatchSample>& val,
                    const TrainConfig& cfg);
FitResult fit_patch(const std::vector<PatchSample>& train, const std::vector<PatchSample>& val,
                    const TrainConfig& cfg);

// A scene after alignment, downscaling, masking and normalization.
struct PreparedScene {
  std::string scene_id;
  std::string location_id;
  Date date;
  FeatureStack features;
  LabelRaster labels{1, 1, kIgnoreLabel};
};

FitResult fit_pixel(const std::vector<PreparedScene>& train,
                    const std::vector<PreparedScene>& val, const SamplingConfig& crop_cfg,
                    const AugmentationConfig& aug, const TrainConfig& cfg);

// Crop pool variant: draws windows from a fixed record list instead of free
// random crops, so nested data-quantity subsets stay nested.
FitResult fit_pixel_pool(const std::vector<PreparedScene>& train,
                         const std::vector<PatchRecord>& pool,
                         const std::vector<PreparedScene>& val, const AugmentationConfig& aug,
                         const TrainConfig& cfg);

void predict_proba(const ModelState& state, const double* x, double* probs);
int predict_class(const ModelState& state, const double* x);  // argmax, ties to smaller index
uint8_t predict_patch_window(const ModelState& state, const FeatureStack& stack, int r0, int c0,
                             int size);  // abstains on an all-non-finite channel
LabelRaster predict_pixels(const ModelState& state, const FeatureStack& stack);

// Mean cross entropy plus parameter gradients over a sample span; shared by the
// trainer and by finite-difference checks.
double ce_loss_and_grad(const std::vector<double>& weights, const std::vector<double>& bias,
                        int n_classes, int dim, const PatchSample* samples, size_t n,
                        std::vector<double>* grad_w, std::vector<double>* grad_b);

void save_training_log(const std::vector<EpochLog>& log, const std::string& path);

}  // namespace icebench
