#include "tracklabel/detector.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "tracklabel/error.hpp"
#include "tracklabel/heatmap.hpp"
#include "tracklabel/io.hpp"

extern char** environ;

namespace tracklabel {

std::vector<Heatmap> Detector::predict_all(std::span<const GrayImage> images) const {
  std::vector<Heatmap> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(predict(img));
  return out;
}

double batch_masked_loss(std::span<const Heatmap> predictions,
                         std::span<const TrainingSample> data) {
  require(!data.empty() && predictions.size() == data.size(), ErrorKind::InvalidInput,
          "batch loss needs one prediction per training frame");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    total += masked_mse(predictions[i], *data[i].target, *data[i].mask);
  return total / static_cast<double>(data.size());
}

double batch_masked_loss(const Detector& detector, std::span<const TrainingSample> data) {
  std::vector<GrayImage> images;
  images.reserve(data.size());
  for (const auto& s : data) images.push_back(*s.image);
  return batch_masked_loss(detector.predict_all(images), data);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_command(const std::string& command) {
  std::istringstream in(command);
  std::vector<std::string> out;
  for (std::string part; in >> part;) out.push_back(part);
  return out;
}

std::string tail_of(const std::filesystem::path& path, std::size_t limit) {
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text.size() > limit ? text.substr(text.size() - limit) : text;
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, std::chrono::milliseconds timeout,
                          const std::filesystem::path& log_file) {
  require(!argv.empty(), ErrorKind::InvalidParameter, "empty command line");
  if (log_file.has_parent_path()) std::filesystem::create_directories(log_file.parent_path());

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log_file.c_str(),
                                   O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);

  ProcessResult result;
  if (rc != 0) {
    result.output = "spawn failed for '" + argv[0] + "': " + std::strerror(rc);
    return result;
  }

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  while (true) {
    const pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0) {
      result.output = "waitpid failed";
      return result;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      result.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (!result.timed_out) {
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) result.exit_code = 128 + WTERMSIG(status);
  }
  result.output = tail_of(log_file, 4096);
  return result;
}

ExternalDetector::ExternalDetector(ExternalDetectorConfig config) : config_(std::move(config)) {
  require(!split_command(config_.command).empty(), ErrorKind::InvalidParameter,
          "external detector needs a command");
  require(!config_.work_dir.empty(), ErrorKind::InvalidParameter,
          "external detector needs a work directory");
  require(config_.retries >= 0, ErrorKind::InvalidParameter, "retries must be >= 0");
}

namespace {

void run_with_retries(const std::vector<std::string>& argv, const ExternalDetectorConfig& cfg,
                      const std::filesystem::path& log, const std::string& what) {
  ProcessResult last;
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    last = run_process(argv, cfg.timeout, log);
    if (!last.timed_out && last.exit_code == 0) return;
  }
  std::string reason = last.timed_out ? "timed out" : "exit code " + std::to_string(last.exit_code);
  fail(ErrorKind::ExternalDetector,
       "external " + what + " failed (" + reason + ", " + std::to_string(cfg.retries + 1) +
           " attempt(s)); output tail: " + last.output);
}

}  // namespace

std::vector<Heatmap> ExternalDetector::run_predict(std::span<const GrayImage> images,
                                                   const std::vector<std::string>& stems) const {
  const int call = calls_++;
  const auto dir = config_.work_dir / ("predict_" + std::to_string(call));
  const auto in_dir = dir / "images";
  const auto out_dir = dir / "heatmaps";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(in_dir);
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < images.size(); ++i)
    io::write_pgm(in_dir / (stems[i] + ".pgm"), images[i]);

  auto argv = split_command(config_.command);
  argv.insert(argv.end(), {"predict", "--model", config_.model.string(), "--images",
                           in_dir.string(), "--out", out_dir.string()});
  run_with_retries(argv, config_, dir / "log.txt", "predict");

  std::vector<Heatmap> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto path = out_dir / (stems[i] + ".hmap");
    require(std::filesystem::exists(path), ErrorKind::ExternalDetector,
            "external predict produced no heatmap " + path.string());
    Heatmap h;
    try {
      h = io::read_heatmap(path);
    } catch (const Error& e) {
      fail(ErrorKind::ExternalDetector, std::string("malformed external heatmap: ") + e.what());
    }
    require(h.same_shape(images[i]), ErrorKind::ExternalDetector,
            "external heatmap " + path.string() + " does not match the image dimensions");
    out.push_back(std::move(h));
  }
  return out;
}

Heatmap ExternalDetector::predict(const GrayImage& image) const {
  return run_predict(std::span(&image, 1), {"image"}).front();
}

std::vector<Heatmap> ExternalDetector::predict_all(std::span<const GrayImage> images) const {
  std::vector<std::string> stems;
  for (std::size_t i = 0; i < images.size(); ++i)
    stems.push_back(io::frame_stem(static_cast<int>(i) + 1));
  return run_predict(images, stems);
}

void ExternalDetector::fit(std::span<const TrainingSample> data) {
  require(!data.empty(), ErrorKind::InvalidInput, "fit needs at least one training frame");
  const auto dir = config_.work_dir / ("train_" + std::to_string(version_ + 1));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  PseudoLabelSet bundle;
  for (const auto& s : data) {
    require(s.image && s.target && s.mask, ErrorKind::InvalidInput, "incomplete training sample");
    PseudoLabeledFrame f;
    f.frame = s.frame;
    f.heatmap = *s.target;
    f.mask = *s.mask;
    f.image_path = s.image_path;
    if (f.image_path.empty()) {
      const auto img = dir / "images" / (io::frame_stem(s.frame) + ".pgm");
      io::write_pgm(img, *s.image);
      f.image_path = std::filesystem::absolute(img).string();
    }
    bundle.frames.push_back(std::move(f));
  }
  io::write_pseudo_label_bundle(dir, bundle);

  const auto new_model = dir / "model";
  auto argv = split_command(config_.command);
  argv.insert(argv.end(), {"train", "--model", config_.model.string(), "--manifest",
                           (dir / "manifest.csv").string(), "--out-model", new_model.string()});
  for (auto& extra : split_command(config_.train_args)) argv.push_back(std::move(extra));
  run_with_retries(argv, config_, dir / "log.txt", "train");
  require(std::filesystem::exists(new_model), ErrorKind::ExternalDetector,
          "external train did not write " + new_model.string());
  config_.model = new_model;
  ++version_;
}

std::filesystem::path ExternalDetector::save(const std::filesystem::path& stem) const {
  auto path = stem;
  path += ".external";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot open for writing: " + path.string());
  out << config_.model.string() << '\n';
  return path;
}

}  // namespace tracklabel
