#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracklabel/grid.hpp"
#include "tracklabel/pseudolabel.hpp"

namespace tracklabel {

/// One training example: image, target heatmap and reliability mask.
/// Non-owning; the referenced objects must outlive the call that uses it.
struct TrainingSample {
  const GrayImage* image = nullptr;
  const Heatmap* target = nullptr;
  const Mask* mask = nullptr;
  int frame = 1;
  std::string image_path;  // optional, forwarded to external trainers
};

/// Mean of masked_mse(predict(image), target, mask) over the samples.
class Detector;
double batch_masked_loss(const Detector& detector, std::span<const TrainingSample> data);
double batch_masked_loss(std::span<const Heatmap> predictions, std::span<const TrainingSample> data);

/// A heatmap regressor f_d. predict() is const and may run concurrently;
/// fit() needs exclusive access.
class Detector {
 public:
  virtual ~Detector() = default;

  virtual std::string_view kind() const = 0;
  virtual Heatmap predict(const GrayImage& image) const = 0;
  /// Default predicts one image at a time; adapters may batch.
  virtual std::vector<Heatmap> predict_all(std::span<const GrayImage> images) const;
  virtual void fit(std::span<const TrainingSample> data) = 0;
  /// Incremented by every fit.
  virtual int version() const = 0;
  /// Persists the model state under `stem` (the implementation picks the
  /// extension) and returns the written path.
  virtual std::filesystem::path save(const std::filesystem::path& stem) const = 0;
};

// ---------------------------------------------------------------------------
// Built-in matched filter

/// Zero-mean, unit-variance square template plus a response threshold c:
/// heatmap = clamp((ncc - c) / (1 - c), 0, 1).
struct CorrelationModel {
  int radius = 6;
  std::vector<float> kernel;  // (2 * radius + 1)^2, row-major
  double threshold = 0.5;
  int version = 0;

  int side() const { return 2 * radius + 1; }
  friend bool operator==(const CorrelationModel&, const CorrelationModel&) = default;
};

struct CorrelationFitOptions {
  double threshold_min = 0.00;
  double threshold_max = 0.95;
  double threshold_step = 0.01;
};

/// Gaussian blob template with standard deviation radius / 2.5, threshold 0.5.
CorrelationModel initial_correlation_model(int radius);

/// Normalised cross-correlation of the template with every pixel's window
/// (reflect padding at the borders). Flat windows respond 0.
Grid<float, HeatmapTag> correlation_response(const CorrelationModel& model, const GrayImage& image);
Heatmap response_to_heatmap(const Heatmap& response, double threshold);
Heatmap predict(const CorrelationModel& model, const GrayImage& image);

/// Re-estimates the template as the mean of normalised image windows around
/// the positive peaks of (target * mask) whose centre is mask-valid, then
/// picks the response threshold minimising the batch masked loss by grid search.
/// Among {input model, input template + new threshold, new template + new threshold}
/// the lowest-loss one is returned, so the loss never increases.
CorrelationModel fit(const CorrelationModel& model, std::span<const TrainingSample> data,
                     const CorrelationFitOptions& options = {});

namespace io {
// "TMPL" v1: magic, u32 version=1, u32 radius, u32 model version,
// f64 response threshold, f32[(2r+1)^2] template (little-endian).
void write_correlation_model(const std::filesystem::path& path, const CorrelationModel& model);
CorrelationModel read_correlation_model(const std::filesystem::path& path);
}  // namespace io

class CorrelationDetector final : public Detector {
 public:
  explicit CorrelationDetector(CorrelationModel model, CorrelationFitOptions options = {})
      : model_(std::move(model)), options_(options) {}

  std::string_view kind() const override { return "builtin"; }
  Heatmap predict(const GrayImage& image) const override;
  void fit(std::span<const TrainingSample> data) override;
  int version() const override { return model_.version; }
  std::filesystem::path save(const std::filesystem::path& stem) const override;

  const CorrelationModel& model() const { return model_; }

 private:
  CorrelationModel model_;
  CorrelationFitOptions options_;
};

// ---------------------------------------------------------------------------
// External process adapter

struct ExternalDetectorConfig {
  std::string command;                  // program plus leading arguments, whitespace separated
  std::filesystem::path model;          // opaque model artifact owned by the external tool
  std::filesystem::path work_dir;       // scratch space for image and heatmap exchange
  std::chrono::milliseconds timeout{std::chrono::minutes(10)};
  int retries = 0;
  std::string train_args;               // appended verbatim to every train call
};

/// Runs `<command> predict --model M --images DIR --out DIR` and
/// `<command> train --model M --manifest CSV --out-model M2 [train_args]`.
class ExternalDetector final : public Detector {
 public:
  explicit ExternalDetector(ExternalDetectorConfig config);

  std::string_view kind() const override { return "external"; }
  Heatmap predict(const GrayImage& image) const override;
  std::vector<Heatmap> predict_all(std::span<const GrayImage> images) const override;
  void fit(std::span<const TrainingSample> data) override;
  int version() const override { return version_; }
  std::filesystem::path save(const std::filesystem::path& stem) const override;

  const std::filesystem::path& model_path() const { return config_.model; }

 private:
  std::vector<Heatmap> run_predict(std::span<const GrayImage> images,
                                   const std::vector<std::string>& stems) const;

  ExternalDetectorConfig config_;
  int version_ = 0;
  mutable std::atomic<int> calls_{0};
};

/// Outcome of a child process run with a deadline.
struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string output;  // combined stdout/stderr, truncated to the last 4 KiB
};

/// Spawns argv[0] (PATH lookup) without a shell and waits up to `timeout`.
ProcessResult run_process(const std::vector<std::string>& argv, std::chrono::milliseconds timeout,
                          const std::filesystem::path& log_file);

}  // namespace tracklabel
