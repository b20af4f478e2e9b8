#pragma once

#include <fstream>

#include "tracklabel/detector.hpp"
#include "tracklabel/heatmap.hpp"
#include "tracklabel/simulator.hpp"

namespace oracle {

// Answers every known frame with the encoding of its ground truth.
class PerfectDetector final : public tracklabel::Detector {
 public:
  PerfectDetector(const tracklabel::SyntheticSequence& sim, double sigma) : sim_(sim), sigma_(sigma) {}

  std::string_view kind() const override { return "perfect"; }

  tracklabel::Heatmap predict(const tracklabel::GrayImage& image) const override {
    for (std::size_t i = 0; i < sim_.images.size(); ++i)
      if (sim_.images[i] == image)
        return tracklabel::encode_heatmap(sim_.gt_points[i], image.width(), image.height(), sigma_);
    return tracklabel::Heatmap(image.width(), image.height());
  }

  void fit(std::span<const tracklabel::TrainingSample> data) override {
    fitted_ += data.size();
    ++version_;
  }
  int version() const override { return version_; }
  std::filesystem::path save(const std::filesystem::path& stem) const override {
    auto path = stem;
    path += ".perfect";
    std::filesystem::create_directories(path.parent_path());
    std::ofstream(path) << version_ << '\n';
    return path;
  }

  std::size_t fitted() const { return fitted_; }

 private:
  const tracklabel::SyntheticSequence& sim_;
  double sigma_;
  int version_ = 0;
  std::size_t fitted_ = 0;
};

}  // namespace oracle
