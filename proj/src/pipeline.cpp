#include "tracklabel/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <thread>

#include "tracklabel/error.hpp"
#include "tracklabel/heatmap.hpp"
#include "tracklabel/io.hpp"

namespace tracklabel {

namespace fs = std::filesystem;

std::vector<fs::path> list_frame_images(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorKind::InvalidInput, "not a directory: " + dir.string());
  std::vector<std::pair<int, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".pgm" && ext != ".png") continue;
    int frame = 0;
    try {
      frame = io::parse_int(entry.path().stem().string());
    } catch (const Error&) {
      fail(ErrorKind::InvalidInput, "image name is not a frame number: " + entry.path().string());
    }
    found.emplace_back(frame, entry.path());
  }
  std::sort(found.begin(), found.end());
  for (std::size_t i = 0; i < found.size(); ++i)
    require(found[i].first == static_cast<int>(i) + 1, ErrorKind::InvalidInput,
            "frames in " + dir.string() + " must be numbered 1..T without gaps or duplicates");
  std::vector<fs::path> out;
  for (auto& [frame, path] : found) out.push_back(std::move(path));
  return out;
}

Dataset load_dataset(const fs::path& root, int labeled_frame) {
  Dataset d;
  const auto paths = list_frame_images(root / "images");
  require(!paths.empty(), ErrorKind::InvalidInput, "no images under " + (root / "images").string());
  for (const auto& p : paths) {
    d.images.push_back(io::read_image(p));
    require(d.images.back().same_shape(d.images.front()), ErrorKind::InvalidInput,
            "all frames must share dimensions: " + p.string());
    d.image_paths.push_back(fs::absolute(p).lexically_normal().string());
  }
  require(labeled_frame >= 1 && labeled_frame <= d.frames(), ErrorKind::InvalidParameter,
          "labeled frame " + std::to_string(labeled_frame) + " outside [1, " +
              std::to_string(d.frames()) + "]");
  d.labeled_frame = labeled_frame;
  d.labeled_points =
      io::read_label_csv(root / "labels" / (io::frame_stem(labeled_frame) + ".csv"), labeled_frame);
  if (const auto gt = root / "gt" / "points.csv"; fs::exists(gt))
    d.gt = io::read_points_csv(gt, d.frames());
  return d;
}

std::unique_ptr<Detector> make_detector(const PipelineConfig& config, const fs::path& work_dir) {
  if (config.detector == "external") {
    ExternalDetectorConfig ext;
    ext.command = config.external_command;
    ext.model = config.external_model;
    ext.work_dir = work_dir;
    ext.timeout = std::chrono::milliseconds(static_cast<long long>(config.external_timeout_s * 1000));
    ext.retries = config.external_retries;
    ext.train_args = config.external_train_args;
    return std::make_unique<ExternalDetector>(std::move(ext));
  }
  CorrelationFitOptions options;
  options.threshold_step = config.threshold_step;
  return std::make_unique<CorrelationDetector>(
      initial_correlation_model(config.resolved_template_radius()), options);
}

std::vector<Heatmap> predict_sequence(const Detector& detector, std::span<const GrayImage> images,
                                      int threads) {
  if (threads <= 1 || detector.kind() == "external" || images.size() < 2)
    return detector.predict_all(images);
  std::vector<Heatmap> out(images.size());
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), images.size());
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < images.size(); i += workers) out[i] = detector.predict(images[i]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

Sequence detect_sequence(std::span<const Heatmap> heatmaps, double peak_threshold,
                         double min_separation) {
  Sequence out;
  out.reserve(heatmaps.size());
  for (std::size_t i = 0; i < heatmaps.size(); ++i)
    out.push_back(detect_peaks(heatmaps[i], peak_threshold, min_separation, static_cast<int>(i) + 1));
  return out;
}

namespace {

class StepLog {
 public:
  explicit StepLog(bool enabled) : enabled_(enabled) {}

  void start() { t0_ = std::chrono::steady_clock::now(); }

  void done(const std::string& step, int iteration, const std::string& extra = {}) const {
    if (!enabled_) return;
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
    std::clog << "tracklabel step=" << step << " iteration=" << iteration << " ms=" << ms;
    if (!extra.empty()) std::clog << ' ' << extra;
    std::clog << '\n';
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point t0_{};
};

void write_heatmaps(const fs::path& dir, std::span<const Heatmap> heatmaps) {
  for (std::size_t i = 0; i < heatmaps.size(); ++i)
    io::write_heatmap(dir / (io::frame_stem(static_cast<int>(i) + 1) + ".hmap"), heatmaps[i]);
}

void write_warnings(const fs::path& path, std::span<const PseudoLabelWarning> warnings) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot open for writing: " + path.string());
  out << "frame,message\n";
  for (const auto& w : warnings) out << w.frame << ',' << w.message << '\n';
}

void write_report(const fs::path& path, std::span<const IterationReport> reports,
                  const std::optional<SequenceScore>& final_score) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot open for writing: " + path.string());
  out << "iteration,a,b,n_pseudo_labels,n_masked_pixels,loss_before,loss_after,f1\n";
  for (const auto& r : reports) {
    out << r.iteration << ',' << r.range.a << ',' << r.range.b << ',' << r.n_pseudo_labels << ','
        << r.n_masked_pixels << ',' << io::format_number(r.loss_before) << ','
        << io::format_number(r.loss_after) << ',';
    if (r.score) out << io::format_number(r.score->total.f1);
    out << '\n';
  }
  out << "final,,,,,,,";
  if (final_score) out << io::format_number(final_score->total.f1);
  out << '\n';
}

}  // namespace

void fit_on_labeled_frame(Detector& detector, const Dataset& data, const PipelineConfig& config) {
  const int l = data.labeled_frame;
  const GrayImage& image = data.images[static_cast<std::size_t>(l - 1)];
  const Heatmap target =
      encode_heatmap(data.labeled_points, image.width(), image.height(), config.resolved_sigma());
  const Mask mask = all_ones_mask(image.width(), image.height());
  const TrainingSample sample{&image, &target, &mask, l, data.image_paths.empty() ? std::string{} : data.image_paths[l - 1]};
  detector.fit(std::span(&sample, 1));
}

PipelineResult run_pipeline(const PipelineConfig& config, const Dataset& data, Detector& detector) {
  validate(config);
  require(config.labeled_frame == data.labeled_frame, ErrorKind::InvalidParameter,
          "config and dataset disagree on the labeled frame");
  require(data.frames() >= 1, ErrorKind::InvalidInput, "empty sequence");
  const int frames = data.frames();
  const int l = data.labeled_frame;
  const bool persist = !config.output_root.empty();
  const fs::path out = config.output_root;
  StepLog log(config.log);

  if (persist) {
    fs::create_directories(out);
    std::ofstream(out / "config.cfg") << to_config_text(config);
  }

  log.start();
  fit_on_labeled_frame(detector, data, config);
  if (persist) detector.save(out / "iter_0" / "model");
  log.done("fit_labeled", 0);

  PipelineResult result;
  std::optional<FrameRange> previous;
  for (int k = 1; k <= config.gamma; ++k) {
    const fs::path dir = out / ("iter_" + std::to_string(k));
    IterationReport report;
    report.iteration = k;

    log.start();
    const auto heatmaps = predict_sequence(detector, data.images, config.threads);
    const Sequence detections =
        detect_sequence(heatmaps, config.peak_threshold, config.resolved_min_separation());
    if (data.gt) report.score = score_sequence(detections, *data.gt, config.resolved_eval_gate());
    if (persist) {
      write_heatmaps(dir / "heatmaps", heatmaps);
      io::write_points_csv(dir / "detections.csv", detections);
      if (report.score) io::write_evaluation_csv(dir / "evaluation.csv", *report.score);
    }
    log.done("predict_detect", k, "frames=" + std::to_string(frames));

    log.start();
    const TrackSet tracks = build_tracks(detections, l, config.resolved_gate());
    report.ratios = tracked_ratios(tracks, detections);
    if (detections[static_cast<std::size_t>(l - 1)].empty()) {
      report.range = {l, l};
      report.warnings.push_back({l, "no detections at the labeled frame; range limited to it"});
    } else {
      report.range = select_frame_range(report.ratios, config.alpha, l);
    }
    if (persist) {
      io::write_tracks_csv(dir / "tracks.csv", tracks);
      io::write_terminations_csv(dir / "terminations.csv", tracks);
      io::write_ratios_csv(dir / "ratios.csv", report.ratios);
    }
    log.done("track", k,
             "chains=" + std::to_string(tracks.chains.size()) + " a=" + std::to_string(report.range.a) +
                 " b=" + std::to_string(report.range.b));

    log.start();
    const PseudoLabelSet labels = build_pseudo_labels({tracks, detections, report.range,
                                                       data.labeled_points, data.width(),
                                                       data.height(), config.resolved_sigma(),
                                                       config.beta, data.image_paths});
    report.warnings.insert(report.warnings.end(), labels.warnings.begin(), labels.warnings.end());
    report.n_pseudo_labels = labels.frames.size();
    for (const auto& f : labels.frames) report.n_masked_pixels += count_masked(f.mask);
    if (persist) {
      io::write_pseudo_label_bundle(dir / "pseudolabels", labels);
      write_warnings(dir / "warnings.csv", report.warnings);
    }
    log.done("pseudolabel", k, "n=" + std::to_string(report.n_pseudo_labels));

    log.start();
    std::vector<TrainingSample> samples;
    std::vector<Heatmap> current;
    for (const auto& f : labels.frames) {
      const auto i = static_cast<std::size_t>(f.frame - 1);
      samples.push_back({&data.images[i], &f.heatmap, &f.mask, f.frame, f.image_path});
      current.push_back(heatmaps[i]);
    }
    report.loss_before = batch_masked_loss(current, samples);
    detector.fit(samples);
    report.loss_after = batch_masked_loss(detector, samples);
    if (persist) detector.save(dir / "model");
    log.done("fit", k,
             "loss_before=" + io::format_number(report.loss_before) +
                 " loss_after=" + io::format_number(report.loss_after));

    result.iterations.push_back(std::move(report));
    const FrameRange range = result.iterations.back().range;
    if (range == FrameRange{1, frames} && previous == range) break;
    previous = range;
  }

  log.start();
  const auto heatmaps = predict_sequence(detector, data.images, config.threads);
  result.final_detections =
      detect_sequence(heatmaps, config.peak_threshold, config.resolved_min_separation());
  if (data.gt)
    result.final_score = score_sequence(result.final_detections, *data.gt, config.resolved_eval_gate());
  if (persist) {
    write_heatmaps(out / "final" / "heatmaps", heatmaps);
    io::write_points_csv(out / "final" / "detections.csv", result.final_detections);
    if (result.final_score) {
      io::write_evaluation_csv(out / "final" / "evaluation.csv", *result.final_score);
      io::write_ppm(out / "final" / "f1.ppm", plot_f1_curve(*result.final_score));
    }
    write_report(out / "report.csv", result.iterations, result.final_score);
  }
  log.done("final", static_cast<int>(result.iterations.size()));
  return result;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  validate(config);
  require(!config.data_root.empty(), ErrorKind::InvalidParameter, "data_root is required");
  const Dataset data = load_dataset(config.data_root, config.labeled_frame);
  const fs::path work = config.output_root.empty() ? fs::temp_directory_path() / "tracklabel_work"
                                                   : config.output_root / "work";
  auto detector = make_detector(config, work);
  return run_pipeline(config, data, *detector);
}

}  // namespace tracklabel
