#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tracklabel/config.hpp"
#include "tracklabel/detector.hpp"
#include "tracklabel/error.hpp"
#include "tracklabel/evaluation.hpp"
#include "tracklabel/heatmap.hpp"
#include "tracklabel/io.hpp"
#include "tracklabel/pipeline.hpp"
#include "tracklabel/pseudolabel.hpp"
#include "tracklabel/simulator.hpp"
#include "tracklabel/tracking.hpp"

namespace fs = std::filesystem;
using namespace tracklabel;

namespace {

// Settings gathered from --config and flag overrides, applied in that order.
struct Settings {
  std::optional<fs::path> config_file;
  std::vector<std::pair<std::string, std::string>> overrides;

  std::vector<std::pair<std::string, std::string>> entries() const {
    std::vector<std::pair<std::string, std::string>> out;
    if (config_file) out = read_key_values(*config_file);
    out.insert(out.end(), overrides.begin(), overrides.end());
    return out;
  }

  PipelineConfig pipeline() const {
    PipelineConfig c;
    for (const auto& [k, v] : entries()) apply_setting(c, k, v);
    validate(c);
    return c;
  }
};

void add_settings(CLI::App* cmd, Settings& s, const std::vector<std::pair<std::string, std::string>>& flags) {
  cmd->add_option("--config", s.config_file, "key = value settings file")->check(CLI::ExistingFile);
  cmd->add_option_function<std::vector<std::string>>(
      "--set",
      [&s](const std::vector<std::string>& items) {
        for (const auto& item : items) {
          const auto eq = item.find('=');
          if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value");
          s.overrides.emplace_back(item.substr(0, eq), item.substr(eq + 1));
        }
      },
      "override any setting, key=value");
  for (const auto& [flag, key] : flags)
    cmd->add_option_function<std::string>(
        flag, [&s, key](const std::string& v) { s.overrides.emplace_back(key, v); },
        "sets " + key);
}

const std::vector<std::pair<std::string, std::string>> kPipelineFlags = {
    {"--data", "data_root"},         {"--out", "output_root"},
    {"--labeled-frame", "labeled_frame"}, {"--alpha", "alpha"},
    {"--beta", "beta"},              {"--gamma", "gamma"},
    {"--sigma", "sigma"},            {"--gate", "gate"},
    {"--peak-threshold", "peak_threshold"}, {"--min-separation", "min_separation"},
    {"--detector", "detector"},      {"--seed", "seed"},
    {"--threads", "threads"},
};

std::unique_ptr<Detector> load_detector(const PipelineConfig& c, const std::optional<fs::path>& model,
                                        const fs::path& work_dir) {
  if (c.detector == "external") {
    PipelineConfig ext = c;
    if (model) ext.external_model = *model;
    return make_detector(ext, work_dir);
  }
  if (!model) return make_detector(c, work_dir);
  CorrelationFitOptions options;
  options.threshold_step = c.threshold_step;
  return std::make_unique<CorrelationDetector>(io::read_correlation_model(*model), options);
}

std::vector<GrayImage> read_images(const fs::path& dir, std::vector<std::string>* paths = nullptr) {
  const auto files = list_frame_images(dir);
  require(!files.empty(), ErrorKind::Usage, "no frame images in " + dir.string());
  std::vector<GrayImage> images;
  for (const auto& f : files) {
    images.push_back(io::read_image(f));
    require(images.back().same_shape(images.front()), ErrorKind::InvalidInput,
            "all frames must share dimensions: " + f.string());
    if (paths) paths->push_back(fs::absolute(f).lexically_normal().string());
  }
  return images;
}

void print_range(const FrameRange& r) { std::cout << "a=" << r.a << " b=" << r.b << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised cell detection from one annotated frame"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // simulate
  Settings sim_settings;
  fs::path sim_out;
  std::optional<int> sim_labeled;
  auto* sim = app.add_subcommand("simulate", "write a synthetic drifting time-lapse dataset");
  add_settings(sim, sim_settings,
               {{"--seed", "seed"}, {"--frames", "sim_frames"}, {"--width", "sim_width"},
                {"--height", "sim_height"}, {"--cells", "sim_cells"},
                {"--contrast-decay", "sim_contrast_decay"}, {"--noise-growth", "sim_noise_growth"},
                {"--division-rate", "sim_division_rate"}});
  sim->add_option("--out", sim_out, "dataset root")->required();
  sim->add_option("--labeled-frame", sim_labeled, "also write labels/{l}.csv (default: labeled_frame from the config)");

  // detect
  Settings det_settings;
  fs::path det_images, det_out;
  std::optional<fs::path> det_model;
  auto* det = app.add_subcommand("detect", "predict heatmaps and decode peaks for a directory");
  add_settings(det, det_settings, kPipelineFlags);
  det->add_option("--images", det_images, "directory of frame images")->required();
  det->add_option("--model", det_model, "model file (.tmpl for the builtin detector)");
  det->add_option("--output", det_out, "output directory")->required();

  // track
  Settings trk_settings;
  fs::path trk_det, trk_out;
  int trk_frames = 0;
  auto* trk = app.add_subcommand("track", "link detections from the labeled frame and select the range");
  add_settings(trk, trk_settings, kPipelineFlags);
  trk->add_option("--detections", trk_det, "frame,x,y CSV")->required()->check(CLI::ExistingFile);
  trk->add_option("--frames", trk_frames, "sequence length (default: last frame in the CSV)");
  trk->add_option("--output", trk_out, "output directory")->required();

  // pseudolabel
  Settings pl_settings;
  fs::path pl_det, pl_images, pl_labels, pl_out;
  std::optional<fs::path> pl_tracks, pl_terms;
  auto* pl = app.add_subcommand("pseudolabel", "build pseudo-heatmaps and masks over the range");
  add_settings(pl, pl_settings, kPipelineFlags);
  pl->add_option("--detections", pl_det, "frame,x,y CSV")->required()->check(CLI::ExistingFile);
  pl->add_option("--images", pl_images, "directory of frame images")->required();
  pl->add_option("--labels", pl_labels, "x,y CSV of the labeled frame")->required()->check(CLI::ExistingFile);
  pl->add_option("--tracks", pl_tracks, "tracks.csv from `track` (recomputed when absent)");
  pl->add_option("--terminations", pl_terms, "terminations.csv from `track`");
  pl->add_option("--output", pl_out, "bundle directory")->required();

  // fit
  Settings fit_settings;
  fs::path fit_manifest, fit_out_model;
  std::optional<fs::path> fit_model;
  auto* fitc = app.add_subcommand("fit", "fit the detector on a pseudo-label bundle");
  add_settings(fitc, fit_settings, kPipelineFlags);
  fitc->add_option("--manifest", fit_manifest, "bundle manifest.csv")->required()->check(CLI::ExistingFile);
  fitc->add_option("--model", fit_model, "starting model");
  fitc->add_option("--out-model", fit_out_model, "where to write the fitted model (stem)")->required();

  // evaluate
  fs::path ev_det, ev_gt;
  double ev_gate = 18.0;
  int ev_frames = 0;
  std::optional<fs::path> ev_csv, ev_plot;
  auto* ev = app.add_subcommand("evaluate", "score detections against ground truth");
  ev->add_option("--det", ev_det, "frame,x,y CSV of detections")->required()->check(CLI::ExistingFile);
  ev->add_option("--gt", ev_gt, "frame,x,y CSV of ground truth")->required()->check(CLI::ExistingFile);
  ev->add_option("--gate", ev_gate, "association gate in pixels");
  ev->add_option("--frames", ev_frames, "sequence length (default: last frame in either CSV)");
  ev->add_option("--csv", ev_csv, "per-frame evaluation CSV");
  ev->add_option("--plot", ev_plot, "per-frame F1 plot (PPM)");

  // run
  Settings run_settings;
  auto* run = app.add_subcommand("run", "full semi-supervised loop");
  add_settings(run, run_settings, kPipelineFlags);

  // overlay
  fs::path ov_image, ov_out;
  std::optional<fs::path> ov_det, ov_gt, ov_mask;
  int ov_frame = 1;
  auto* ov = app.add_subcommand("overlay", "render detections, ground truth and mask over a frame");
  ov->add_option("--image", ov_image, "frame image")->required()->check(CLI::ExistingFile);
  ov->add_option("--frame", ov_frame, "frame number used to pick rows from the CSVs");
  ov->add_option("--detections", ov_det, "frame,x,y CSV");
  ov->add_option("--gt", ov_gt, "frame,x,y CSV");
  ov->add_option("--mask", ov_mask, "MASK file");
  ov->add_option("--output", ov_out, "PPM file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error kind=" << to_string(ErrorKind::Usage) << " message=" << e.what() << '\n';
    return 2;
  }

  try {
    if (*sim) {
      SimConfig c;
      for (const auto& [k, v] : sim_settings.entries()) {
        if (apply_setting(c, k, v)) continue;
        PipelineConfig pipeline;
        apply_setting(pipeline, k, v);
        if (k == "labeled_frame" && !sim_labeled) sim_labeled = pipeline.labeled_frame;
      }
      const auto seq = simulate(c);
      if (sim_labeled)
        require(*sim_labeled >= 1 && *sim_labeled <= c.frames, ErrorKind::InvalidParameter,
                "labeled frame outside the simulated sequence");
      io::write_synthetic_sequence(sim_out, seq, sim_labeled);
      std::cout << "frames=" << c.frames << " cells=" << seq.gt_points.back().size() << '\n';
    } else if (*det) {
      const auto c = det_settings.pipeline();
      const auto images = read_images(det_images);
      auto detector = load_detector(c, det_model, det_out / "work");
      const auto heatmaps = predict_sequence(*detector, images, c.threads);
      const auto detections = detect_sequence(heatmaps, c.peak_threshold, c.resolved_min_separation());
      for (std::size_t i = 0; i < heatmaps.size(); ++i)
        io::write_heatmap(det_out / "heatmaps" / (io::frame_stem(static_cast<int>(i) + 1) + ".hmap"),
                          heatmaps[i]);
      io::write_points_csv(det_out / "detections.csv", detections);
      std::size_t total = 0;
      for (const auto& d : detections) total += d.size();
      std::cout << "frames=" << detections.size() << " detections=" << total << '\n';
    } else if (*trk) {
      const auto c = trk_settings.pipeline();
      const auto detections = io::read_points_csv(trk_det, trk_frames);
      require(c.labeled_frame <= static_cast<int>(detections.size()), ErrorKind::InvalidParameter,
              "labeled frame beyond the last frame");
      const auto tracks = build_tracks(detections, c.labeled_frame, c.resolved_gate());
      const auto ratios = tracked_ratios(tracks, detections);
      fs::create_directories(trk_out);
      io::write_tracks_csv(trk_out / "tracks.csv", tracks);
      io::write_terminations_csv(trk_out / "terminations.csv", tracks);
      io::write_ratios_csv(trk_out / "ratios.csv", ratios);
      print_range(select_frame_range(ratios, c.alpha, c.labeled_frame));
    } else if (*pl) {
      const auto c = pl_settings.pipeline();
      std::vector<std::string> paths;
      const auto images = read_images(pl_images, &paths);
      const auto detections = io::read_points_csv(pl_det, static_cast<int>(images.size()));
      const auto labeled = io::read_label_csv(pl_labels, c.labeled_frame);
      require(pl_tracks.has_value() == pl_terms.has_value(), ErrorKind::Usage,
              "--tracks and --terminations go together");
      const TrackSet tracks = pl_tracks ? io::read_tracks(*pl_tracks, *pl_terms, detections, c.labeled_frame)
                                        : build_tracks(detections, c.labeled_frame, c.resolved_gate());
      const auto range = select_frame_range(tracked_ratios(tracks, detections), c.alpha, c.labeled_frame);
      const auto set = build_pseudo_labels({tracks, detections, range, labeled, images.front().width(),
                                            images.front().height(), c.resolved_sigma(), c.beta, paths});
      io::write_pseudo_label_bundle(pl_out, set);
      for (const auto& w : set.warnings)
        std::cerr << "warning frame=" << w.frame << " message=" << w.message << '\n';
      print_range(range);
      std::cout << "n_pseudo_labels=" << set.frames.size() << '\n';
    } else if (*fitc) {
      const auto c = fit_settings.pipeline();
      const auto frames = io::read_pseudo_label_bundle(fit_manifest);
      require(!frames.empty(), ErrorKind::InvalidInput, "empty pseudo-label bundle");
      std::vector<GrayImage> images;
      images.reserve(frames.size());
      for (const auto& f : frames) {
        fs::path p = f.image_path;
        if (p.is_relative() && !fs::exists(p)) p = fit_manifest.parent_path() / p;
        images.push_back(io::read_image(p));
      }
      std::vector<TrainingSample> samples;
      for (std::size_t i = 0; i < frames.size(); ++i)
        samples.push_back({&images[i], &frames[i].heatmap, &frames[i].mask, frames[i].frame, frames[i].image_path});
      auto detector = load_detector(c, fit_model, fit_out_model.parent_path() / "work");
      const double before = batch_masked_loss(*detector, samples);
      detector->fit(samples);
      const double after = batch_masked_loss(*detector, samples);
      const auto written = detector->save(fit_out_model);
      std::cout << "loss_before=" << io::format_number(before) << " loss_after=" << io::format_number(after)
                << " model=" << written.string() << '\n';
    } else if (*ev) {
      require(ev_gate > 0.0, ErrorKind::InvalidParameter, "gate must be positive");
      int frames = ev_frames;
      if (frames == 0)
        frames = std::max(static_cast<int>(io::read_points_csv(ev_det).size()),
                          static_cast<int>(io::read_points_csv(ev_gt).size()));
      const auto score = score_sequence(io::read_points_csv(ev_det, frames),
                                        io::read_points_csv(ev_gt, frames), ev_gate);
      if (ev_csv) io::write_evaluation_csv(*ev_csv, score);
      if (ev_plot) io::write_ppm(*ev_plot, plot_f1_curve(score));
      const auto& t = score.total;
      std::cout << "tp=" << t.counts.tp << " fp=" << t.counts.fp << " fn=" << t.counts.fn
                << " precision=" << io::format_number(t.precision)
                << " recall=" << io::format_number(t.recall) << " f1=" << io::format_number(t.f1) << '\n';
    } else if (*run) {
      const auto result = run_pipeline(run_settings.pipeline());
      for (const auto& r : result.iterations) {
        std::cout << "iteration=" << r.iteration << " a=" << r.range.a << " b=" << r.range.b
                  << " n_pseudo_labels=" << r.n_pseudo_labels;
        if (r.score) std::cout << " f1=" << io::format_number(r.score->total.f1);
        std::cout << '\n';
      }
      if (result.final_score) std::cout << "final f1=" << io::format_number(result.final_score->total.f1) << '\n';
    } else if (*ov) {
      const auto image = io::read_image(ov_image);
      auto frame_points = [&](const std::optional<fs::path>& csv) {
        PointSet p;
        p.frame = ov_frame;
        if (!csv) return p;
        const auto seq = io::read_points_csv(*csv);
        if (ov_frame >= 1 && ov_frame <= static_cast<int>(seq.size())) p = seq[static_cast<std::size_t>(ov_frame - 1)];
        return p;
      };
      std::optional<Mask> mask;
      if (ov_mask) mask = io::read_mask(*ov_mask);
      io::write_ppm(ov_out, render_overlay(image, frame_points(ov_det), frame_points(ov_gt),
                                           mask ? &*mask : nullptr));
    }
  } catch (const Error& e) {
    std::cerr << "error kind=" << to_string(e.kind()) << " message=" << e.what() << '\n';
    return e.kind() == ErrorKind::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error kind=" << to_string(ErrorKind::Io) << " message=" << e.what() << '\n';
    return 1;
  }
  return 0;
}
