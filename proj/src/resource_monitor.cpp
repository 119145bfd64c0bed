#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <mutex>
#include <thread>

#include "icebench/metrics.hpp"

namespace icebench {

namespace {

double rss_bytes_now() {
  static const long page = sysconf(_SC_PAGESIZE);
  std::FILE* f = std::fopen("/proc/self/statm", "r");
  if (!f) return 0.0;
  long long vm = 0, rss = 0;
  const int got = std::fscanf(f, "%lld %lld", &vm, &rss);
  std::fclose(f);
  if (got != 2) return 0.0;
  return static_cast<double>(rss) * static_cast<double>(page);
}

double process_cpu_seconds() {
  static const long ticks = sysconf(_SC_CLK_TCK);
  std::FILE* f = std::fopen("/proc/self/stat", "r");
  if (!f) return 0.0;
  char buf[1024];
  const size_t n = std::fread(buf, 1, sizeof(buf) - 1, f);
  std::fclose(f);
  buf[n] = '\0';
  // Field 2 is the executable name in parentheses and may hold spaces;
  // resume after the last ')' and skip to fields 14/15 (utime/stime).
  const char* p = buf;
  for (const char* q = buf; *q; ++q)
    if (*q == ')') p = q + 1;
  int field = 2;
  while (*p && field < 13) {
    while (*p == ' ') ++p;
    while (*p && *p != ' ') ++p;
    ++field;
  }
  long long utime = 0, stime = 0;
  if (std::sscanf(p, " %lld %lld", &utime, &stime) != 2) return 0.0;
  return static_cast<double>(utime + stime) / static_cast<double>(ticks > 0 ? ticks : 100);
}

}  // namespace

struct ResourceMonitor::Impl {
  std::vector<ResourceSample> samples;
  std::mutex sample_mu;
  std::mutex mu;
  std::condition_variable cv;
  bool stopping = false;
  std::thread worker;
  std::chrono::steady_clock::time_point t0;
  double interval;
  double last_cpu;
  double last_t = 0.0;

  explicit Impl(double interval_seconds)
      : t0(std::chrono::steady_clock::now()),
        interval(interval_seconds),
        last_cpu(process_cpu_seconds()) {
    take_sample(0.0, last_cpu);
    worker = std::thread([this] { run(); });
  }

  void run() {
    std::unique_lock<std::mutex> lk(mu);
    while (!stopping) {
      cv.wait_for(lk, std::chrono::duration<double>(interval), [this] { return stopping; });
      if (stopping) break;
      lk.unlock();
      take_sample(seconds_since_start(), process_cpu_seconds());
      lk.lock();
    }
  }

  void take_sample(double t, double cpu) {
    ResourceSample s;
    s.t_seconds = t;
    s.rss_bytes = rss_bytes_now();
    const double dt = t - last_t;
    s.cpu_busy = dt > 0.0 ? std::max(0.0, (cpu - last_cpu) / dt) : 0.0;
    last_t = t;
    last_cpu = cpu;
    std::lock_guard<std::mutex> lk(sample_mu);
    samples.push_back(s);
  }

  double seconds_since_start() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

ResourceMonitor::ResourceMonitor(double interval_seconds) : impl_(new Impl(interval_seconds)) {}

ResourceMonitor::~ResourceMonitor() {
  stop();
  delete impl_;
}

std::vector<ResourceSample> ResourceMonitor::stop() {
  {
    std::lock_guard<std::mutex> lk(impl_->mu);
    if (!impl_->stopping) {
      impl_->stopping = true;
      impl_->cv.notify_all();
    }
  }
  if (impl_->worker.joinable()) {
    impl_->worker.join();
    // Closing sample so even sub-interval phases carry a real span.
    impl_->take_sample(impl_->seconds_since_start(), process_cpu_seconds());
  }
  std::lock_guard<std::mutex> lk(impl_->sample_mu);
  return impl_->samples;
}

double ResourceMonitor::elapsed_seconds() const { return impl_->seconds_since_start(); }

}  // namespace icebench
