#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <string>

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

namespace py = pybind11;
using namespace tracklabel;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using PointArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <class G, class A>
G to_grid(const A& a, const char* what) {
  if (a.ndim() != 2) throw py::value_error(std::string(what) + " must be a 2-D array");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  std::vector<typename G::value_type> values(a.data(), a.data() + a.size());
  return G(w, h, std::move(values));
}

template <class G>
py::array_t<typename G::value_type> from_grid(const G& g) {
  py::array_t<typename G::value_type> out({g.height(), g.width()});
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

PointSet to_points(const PointArray& a, int frame = 1) {
  if (a.size() != 0 && (a.ndim() != 2 || a.shape(1) != 2))
    throw py::value_error("points must be an (N, 2) array of x, y");
  PointSet p;
  p.frame = frame;
  const auto* d = a.data();
  for (py::ssize_t i = 0; i < (a.size() ? a.shape(0) : 0); ++i) p.points.push_back({d[2 * i], d[2 * i + 1]});
  return p;
}

py::array_t<double> from_points(const PointSet& p) {
  py::array_t<double> out({static_cast<py::ssize_t>(p.size()), py::ssize_t{2}});
  auto* d = out.mutable_data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    d[2 * i] = p.points[i].x;
    d[2 * i + 1] = p.points[i].y;
  }
  return out;
}

Sequence to_sequence(const std::vector<PointArray>& frames) {
  Sequence s;
  for (std::size_t i = 0; i < frames.size(); ++i) s.push_back(to_points(frames[i], static_cast<int>(i) + 1));
  return s;
}

py::list from_sequence(const Sequence& s) {
  py::list out;
  for (const auto& p : s) out.append(from_points(p));
  return out;
}

std::string setting_text(const py::handle& v) {
  if (py::isinstance<py::bool_>(v)) return v.cast<bool>() ? "true" : "false";
  return py::str(v);
}

PipelineConfig to_config(const py::dict& settings) {
  PipelineConfig c;
  for (const auto& [k, v] : settings) apply_setting(c, py::str(k), setting_text(v));
  return c;
}

SimConfig to_sim_config(const py::dict& settings) {
  SimConfig c;
  for (const auto& [k, v] : settings) {
    std::string key = py::str(k);
    if (key != "seed" && !key.starts_with("sim_")) key = "sim_" + key;
    if (!apply_setting(c, key, setting_text(v))) fail(ErrorKind::Usage, "unknown simulator setting '" + key + "'");
  }
  return c;
}

py::dict score_dict(const SequenceScore& s) {
  py::dict d;
  d["precision"] = s.total.precision;
  d["recall"] = s.total.recall;
  d["f1"] = s.total.f1;
  d["tp"] = s.total.counts.tp;
  d["fp"] = s.total.counts.fp;
  d["fn"] = s.total.counts.fn;
  std::vector<double> per_frame;
  for (const auto& f : s.per_frame) per_frame.push_back(f.f1);
  d["frames"] = s.frames;
  d["per_frame_f1"] = per_frame;
  return d;
}

std::vector<TrainingSample> samples(const std::vector<GrayImage>& images, const std::vector<Heatmap>& targets,
                                    const std::vector<Mask>& masks) {
  if (images.size() != targets.size() || images.size() != masks.size())
    throw py::value_error("images, targets and masks must have the same length");
  std::vector<TrainingSample> out;
  for (std::size_t i = 0; i < images.size(); ++i)
    out.push_back({&images[i], &targets[i], &masks[i], static_cast<int>(i) + 1, {}});
  return out;
}

}  // namespace

PYBIND11_MODULE(_tracklabel, m) {
  m.doc() = "Cell detection from one annotated frame, extended by tracking-based pseudo-labels.";

  static py::handle error_type = PyErr_NewException("tracklabel.Error", PyExc_RuntimeError, nullptr);
  m.attr("Error") = error_type;
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = error_type(std::string(e.what()));
      instance.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type.ptr(), instance.ptr());
    }
  });

  m.def(
      "encode_heatmap",
      [](const PointArray& points, int width, int height, double sigma) {
        return from_grid(encode_heatmap(to_points(points), width, height, sigma));
      },
      py::arg("points"), py::arg("width"), py::arg("height"), py::arg("sigma"),
      "Max-of-Gaussians heatmap, shape (height, width).");
  m.def(
      "detect_peaks",
      [](const FloatArray& heatmap, double threshold, double min_separation) {
        return from_points(detect_peaks(to_grid<Heatmap>(heatmap, "heatmap"), threshold, min_separation));
      },
      py::arg("heatmap"), py::arg("threshold") = 0.3, py::arg("min_separation"),
      "Local maxima above threshold after suppression, as an (N, 2) array in (y, x) order.");
  m.def(
      "masked_mse",
      [](const FloatArray& pred, const FloatArray& target, const ByteArray& mask) {
        return masked_mse(to_grid<Heatmap>(pred, "pred"), to_grid<Heatmap>(target, "target"),
                          to_grid<Mask>(mask, "mask"));
      },
      py::arg("pred"), py::arg("target"), py::arg("mask"));

  m.def(
      "associate_frames",
      [](const PointArray& left, const PointArray& right, double gate) {
        const Matching mt = associate_frames(to_points(left), to_points(right), gate);
        py::dict d;
        d["pairs"] = mt.pairs;
        d["unmatched_left"] = mt.unmatched_left;
        d["unmatched_right"] = mt.unmatched_right;
        d["total_cost"] = mt.total_cost;
        return d;
      },
      py::arg("left"), py::arg("right"), py::arg("gate"));

  py::enum_<Direction>(m, "Direction").value("Forward", Direction::Forward).value("Backward", Direction::Backward);
  py::class_<FrameRange>(m, "FrameRange")
      .def_readonly("a", &FrameRange::a)
      .def_readonly("b", &FrameRange::b)
      .def("__iter__", [](const FrameRange& r) { return py::iter(py::make_tuple(r.a, r.b)); })
      .def("__repr__", [](const FrameRange& r) {
        return "FrameRange(" + std::to_string(r.a) + ", " + std::to_string(r.b) + ")";
      });
  py::class_<Termination>(m, "Termination")
      .def_readonly("track_id", &Termination::track_id)
      .def_property_readonly("position", [](const Termination& e) { return py::make_tuple(e.position.x, e.position.y); })
      .def_readonly("frame", &Termination::frame)
      .def_readonly("direction", &Termination::direction);
  py::class_<TrackSet>(m, "TrackSet")
      .def_readonly("labeled_frame", &TrackSet::labeled_frame)
      .def_readonly("frames", &TrackSet::frames)
      .def_readonly("terminations", &TrackSet::terminations)
      .def("__len__", [](const TrackSet& t) { return t.chains.size(); })
      .def("first_frame", [](const TrackSet& t, std::size_t id) { return t.chains.at(id).first_frame; })
      .def(
          "positions",
          [](const TrackSet& t, std::size_t id) {
            PointSet p;
            p.points = t.chains.at(id).positions;
            return from_points(p);
          },
          "Positions of chain `id` from its first frame on, as an (N, 2) array.")
      .def("tracked_positions", [](const TrackSet& t, int frame) {
        return from_points(collect_tracked_positions(t, frame));
      });

  m.def(
      "build_tracks",
      [](const std::vector<PointArray>& detections, int labeled_frame, double gate) {
        return build_tracks(to_sequence(detections), labeled_frame, gate);
      },
      py::arg("detections"), py::arg("labeled_frame"), py::arg("gate"),
      "Chains seeded at the labeled frame; detections[i] holds frame i + 1.");
  m.def(
      "tracked_ratios",
      [](const TrackSet& tracks, const std::vector<PointArray>& detections) {
        return tracked_ratios(tracks, to_sequence(detections));
      },
      py::arg("tracks"), py::arg("detections"));
  m.def(
      "select_frame_range",
      [](const std::vector<double>& ratios, double alpha, int labeled_frame) {
        return select_frame_range(ratios, alpha, labeled_frame);
      },
      py::arg("ratios"), py::arg("alpha"), py::arg("labeled_frame"));

  m.def(
      "build_pseudo_labels",
      [](const TrackSet& tracks, const std::vector<PointArray>& detections, std::pair<int, int> range,
         const PointArray& labeled_points, int width, int height, double sigma, double beta) {
        const Sequence det = to_sequence(detections);
        const PointSet labeled = to_points(labeled_points, tracks.labeled_frame);
        const auto set = build_pseudo_labels(
            {tracks, det, {range.first, range.second}, labeled, width, height, sigma, beta});
        py::list frames;
        for (const auto& f : set.frames) {
          py::dict d;
          d["frame"] = f.frame;
          d["heatmap"] = from_grid(f.heatmap);
          d["mask"] = from_grid(f.mask);
          d["n_tracked"] = f.n_tracked;
          frames.append(d);
        }
        py::list warnings;
        for (const auto& w : set.warnings) warnings.append(py::make_tuple(w.frame, w.message));
        return py::make_tuple(frames, warnings);
      },
      py::arg("tracks"), py::arg("detections"), py::arg("range"), py::arg("labeled_points"), py::arg("width"),
      py::arg("height"), py::arg("sigma") = 6.0, py::arg("beta") = 18.0,
      "Returns (frames, warnings); each frame is a dict with heatmap, mask and n_tracked.");

  m.def(
      "score_sequence",
      [](const std::vector<PointArray>& detections, const std::vector<PointArray>& gt, double gate) {
        return score_dict(score_sequence(to_sequence(detections), to_sequence(gt), gate));
      },
      py::arg("detections"), py::arg("gt"), py::arg("gate") = 18.0);

  m.def(
      "simulate",
      [](const py::dict& settings) {
        const auto sim = simulate(to_sim_config(settings));
        const auto& first = sim.images.front();
        py::array_t<float> images({static_cast<py::ssize_t>(sim.images.size()),
                                   static_cast<py::ssize_t>(first.height()),
                                   static_cast<py::ssize_t>(first.width())});
        auto* out = images.mutable_data();
        for (const auto& img : sim.images) out = std::copy(img.values().begin(), img.values().end(), out);
        return py::make_tuple(images, from_sequence(sim.gt_points));
      },
      py::arg("settings") = py::dict(),
      "Synthetic drifting sequence as (images[T, H, W], ground-truth point arrays). Settings use the "
      "config keys with or without the sim_ prefix.");
  m.def(
      "write_synthetic_sequence",
      [](const std::filesystem::path& root, const py::dict& settings, std::optional<int> labeled_frame) {
        io::write_synthetic_sequence(root, simulate(to_sim_config(settings)), labeled_frame);
      },
      py::arg("root"), py::arg("settings") = py::dict(), py::arg("labeled_frame") = py::none());

  py::class_<CorrelationDetector>(m, "CorrelationDetector")
      .def(py::init([](int radius) { return CorrelationDetector(initial_correlation_model(radius)); }),
           py::arg("radius") = 9)
      .def_static(
          "load", [](const std::filesystem::path& path) { return CorrelationDetector(io::read_correlation_model(path)); },
          py::arg("path"))
      .def("predict",
           [](const CorrelationDetector& d, const FloatArray& image) {
             return from_grid(d.predict(to_grid<GrayImage>(image, "image")));
           })
      .def(
          "fit",
          [](CorrelationDetector& d, const std::vector<FloatArray>& images, const std::vector<FloatArray>& targets,
             const std::vector<ByteArray>& masks) {
            std::vector<GrayImage> im;
            std::vector<Heatmap> tg;
            std::vector<Mask> mk;
            for (const auto& a : images) im.push_back(to_grid<GrayImage>(a, "image"));
            for (const auto& a : targets) tg.push_back(to_grid<Heatmap>(a, "target"));
            for (const auto& a : masks) mk.push_back(to_grid<Mask>(a, "mask"));
            const auto s = samples(im, tg, mk);
            d.fit(s);
            return batch_masked_loss(d, s);
          },
          py::arg("images"), py::arg("targets"), py::arg("masks"), "Fits in place and returns the batch masked loss.")
      .def_property_readonly("version", &CorrelationDetector::version)
      .def_property_readonly("threshold", [](const CorrelationDetector& d) { return d.model().threshold; })
      .def_property_readonly("radius", [](const CorrelationDetector& d) { return d.model().radius; })
      .def("save", [](const CorrelationDetector& d, const std::filesystem::path& stem) { return d.save(stem); });

  m.def(
      "run_pipeline",
      [](const py::dict& settings) {
        const PipelineConfig config = to_config(settings);
        PipelineResult result;
        {
          py::gil_scoped_release release;
          result = run_pipeline(config);
        }
        py::list iterations;
        for (const auto& r : result.iterations) {
          py::dict d;
          d["iteration"] = r.iteration;
          d["range"] = py::make_tuple(r.range.a, r.range.b);
          d["ratios"] = r.ratios;
          d["n_pseudo_labels"] = r.n_pseudo_labels;
          d["n_masked_pixels"] = r.n_masked_pixels;
          d["loss_before"] = r.loss_before;
          d["loss_after"] = r.loss_after;
          d["score"] = r.score ? py::object(score_dict(*r.score)) : py::none();
          iterations.append(d);
        }
        py::dict out;
        out["iterations"] = iterations;
        out["detections"] = from_sequence(result.final_detections);
        out["score"] = result.final_score ? py::object(score_dict(*result.final_score)) : py::none();
        return out;
      },
      py::arg("settings"),
      "Runs the full loop. Settings are config-file keys, e.g. {'data_root': ..., 'labeled_frame': 20}.");
}
