#include "tracklabel/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tracklabel/error.hpp"
#include "tracklabel/io.hpp"

namespace tracklabel {

int PipelineConfig::resolved_template_radius() const {
  return template_radius > 0 ? template_radius
                             : std::max(1, static_cast<int>(std::lround(beta / 2.0)));
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return io::parse_number(v);
  } catch (const Error&) {
    fail(ErrorKind::Usage, "setting '" + key + "' expects a number, got '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    return io::parse_int(v);
  } catch (const Error&) {
    fail(ErrorKind::Usage, "setting '" + key + "' expects an integer, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && ptr == v.data() + v.size() && !v.empty(), ErrorKind::Usage,
          "setting '" + key + "' expects an unsigned integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorKind::Usage, "setting '" + key + "' expects true/false, got '" + v + "'");
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Usage, "cannot read config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::Usage,
            path.string() + ":" + std::to_string(number) + ": expected 'key = value'");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void apply_setting(PipelineConfig& c, const std::string& key, const std::string& value) {
  if (key == "data_root") c.data_root = value;
  else if (key == "output_root") c.output_root = value;
  else if (key == "labeled_frame") c.labeled_frame = to_int(key, value);
  else if (key == "alpha") c.alpha = to_double(key, value);
  else if (key == "beta") c.beta = to_double(key, value);
  else if (key == "gamma") c.gamma = to_int(key, value);
  else if (key == "sigma") c.sigma = to_double(key, value);
  else if (key == "gate") c.gate = to_double(key, value);
  else if (key == "peak_threshold") c.peak_threshold = to_double(key, value);
  else if (key == "min_separation") c.min_separation = to_double(key, value);
  else if (key == "eval_gate") c.eval_gate = to_double(key, value);
  else if (key == "detector") c.detector = value;
  else if (key == "template_radius") c.template_radius = to_int(key, value);
  else if (key == "threshold_step") c.threshold_step = to_double(key, value);
  else if (key == "external_command") c.external_command = value;
  else if (key == "external_model") c.external_model = value;
  else if (key == "external_timeout") c.external_timeout_s = to_double(key, value);
  else if (key == "external_retries") c.external_retries = to_int(key, value);
  else if (key == "external_train_args") c.external_train_args = value;
  else if (key == "seed") c.seed = to_u64(key, value);
  else if (key == "threads") c.threads = to_int(key, value);
  else if (key == "log") c.log = to_bool(key, value);
  else if (key.starts_with("sim_")) return;
  else fail(ErrorKind::Usage, "unknown setting '" + key + "'");
}

PipelineConfig read_config(const std::filesystem::path& path) {
  PipelineConfig c;
  for (const auto& [k, v] : read_key_values(path)) apply_setting(c, k, v);
  return c;
}

void validate(const PipelineConfig& c) {
  auto check = [](bool ok, const std::string& message) {
    require(ok, ErrorKind::InvalidParameter, message);
  };
  check(c.alpha > 0.0 && c.alpha <= 1.0, "alpha must lie in (0, 1]");
  check(c.beta > 0.0, "beta must be positive");
  check(c.gamma >= 1, "gamma must be >= 1");
  check(c.labeled_frame >= 1, "labeled_frame must be >= 1");
  check(c.resolved_sigma() > 0.0, "sigma must be positive");
  check(c.resolved_gate() > 0.0, "gate must be positive");
  check(c.resolved_eval_gate() > 0.0, "eval_gate must be positive");
  check(c.peak_threshold > 0.0 && c.peak_threshold < 1.0, "peak_threshold must lie in (0, 1)");
  check(c.resolved_min_separation() >= 1.0, "min_separation must be >= 1");
  check(c.threshold_step > 0.0, "threshold_step must be positive");
  check(c.threads >= 1, "threads must be >= 1");
  check(c.detector == "builtin" || c.detector == "external",
        "detector must be 'builtin' or 'external'");
  if (c.detector == "external") {
    check(!c.external_command.empty(), "external detector needs external_command");
    check(c.external_timeout_s > 0.0, "external_timeout must be positive");
    check(c.external_retries >= 0, "external_retries must be >= 0");
  }
}

std::string to_config_text(const PipelineConfig& c) {
  std::ostringstream out;
  auto num = [](double v) { return io::format_number(v); };
  out << "data_root = " << c.data_root.string() << '\n'
      << "output_root = " << c.output_root.string() << '\n'
      << "labeled_frame = " << c.labeled_frame << '\n'
      << "alpha = " << num(c.alpha) << '\n'
      << "beta = " << num(c.beta) << '\n'
      << "gamma = " << c.gamma << '\n'
      << "sigma = " << num(c.resolved_sigma()) << '\n'
      << "gate = " << num(c.resolved_gate()) << '\n'
      << "peak_threshold = " << num(c.peak_threshold) << '\n'
      << "min_separation = " << num(c.resolved_min_separation()) << '\n'
      << "eval_gate = " << num(c.resolved_eval_gate()) << '\n'
      << "detector = " << c.detector << '\n'
      << "template_radius = " << c.resolved_template_radius() << '\n'
      << "threshold_step = " << num(c.threshold_step) << '\n';
  if (c.detector == "external") {
    out << "external_command = " << c.external_command << '\n'
        << "external_model = " << c.external_model.string() << '\n'
        << "external_timeout = " << num(c.external_timeout_s) << '\n'
        << "external_retries = " << c.external_retries << '\n'
        << "external_train_args = " << c.external_train_args << '\n';
  }
  out << "seed = " << c.seed << '\n';
  return out.str();
}

}  // namespace tracklabel
