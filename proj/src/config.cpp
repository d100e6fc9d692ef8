#include "lglbci/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "lglbci/error.hpp"

namespace lgl {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::InvalidConfig, "bad value '" + value + "' for key '" + key + "'");
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value);
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value);
  }
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& value) {
  Int v{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) bad_value(key, value);
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  bad_value(key, value);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

std::vector<Band> parse_bands(const std::string& key, const std::string& value) {
  std::vector<Band> bands;
  for (const auto& item : split(value, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) bad_value(key, value);
    bands.push_back({parse_double(key, trim(item.substr(0, dash))), parse_double(key, trim(item.substr(dash + 1)))});
  }
  return bands;
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"epochs", [](TrainConfig& c, const std::string& k, const std::string& v) { c.epochs = parse_int<int>(k, v); }},
      {"batch_size", [](TrainConfig& c, const std::string& k, const std::string& v) { c.batch_size = parse_int<int>(k, v); }},
      {"learning_rate", [](TrainConfig& c, const std::string& k, const std::string& v) { c.learning_rate = parse_double(k, v); }},
      {"seed", [](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = parse_int<std::uint64_t>(k, v); }},
      {"bands", [](TrainConfig& c, const std::string& k, const std::string& v) { c.bands.bands = parse_bands(k, v); }},
      {"filter_order", [](TrainConfig& c, const std::string& k, const std::string& v) { c.bands.filter_order = parse_int<int>(k, v); }},
      {"stopband_atten_db",
       [](TrainConfig& c, const std::string& k, const std::string& v) { c.bands.stopband_atten_db = parse_double(k, v); }},
      {"window_len", [](TrainConfig& c, const std::string& k, const std::string& v) { c.window_len = parse_int<std::size_t>(k, v); }},
      {"shrinkage", [](TrainConfig& c, const std::string& k, const std::string& v) { c.shrinkage = parse_double(k, v); }},
      {"bimap_layers", [](TrainConfig& c, const std::string& k, const std::string& v) { c.bimap_layers = parse_int<int>(k, v); }},
      {"bimap_widths",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         c.bimap_widths.clear();
         if (v.empty()) return;
         for (const auto& item : split(v, ',')) c.bimap_widths.push_back(parse_int<std::size_t>(k, item));
       }},
      {"reeig_epsilon", [](TrainConfig& c, const std::string& k, const std::string& v) { c.reeig_epsilon = parse_double(k, v); }},
      {"karcher_iterations",
       [](TrainConfig& c, const std::string& k, const std::string& v) { c.karcher_iterations = parse_int<int>(k, v); }},
      {"karcher_tolerance",
       [](TrainConfig& c, const std::string& k, const std::string& v) { c.karcher_tolerance = parse_double(k, v); }},
      {"rbn_momentum", [](TrainConfig& c, const std::string& k, const std::string& v) { c.rbn_momentum = parse_double(k, v); }},
      {"rbn_bias", [](TrainConfig& c, const std::string& k, const std::string& v) { c.rbn_bias = parse_bool(k, v); }},
      {"m", [](TrainConfig& c, const std::string& k, const std::string& v) { c.m = parse_int<std::size_t>(k, v); }},
      {"heads", [](TrainConfig& c, const std::string& k, const std::string& v) { c.heads = parse_int<std::size_t>(k, v); }},
      {"selection_max_iters",
       [](TrainConfig& c, const std::string& k, const std::string& v) { c.selection_max_iters = parse_int<int>(k, v); }},
      {"selection_tol", [](TrainConfig& c, const std::string& k, const std::string& v) { c.selection_tol = parse_double(k, v); }},
      {"selection_rule",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         if (v == "row_norm") c.selection_rule = ChannelRule::RowNorm;
         else if (v == "argmax_entry") c.selection_rule = ChannelRule::ArgmaxEntry;
         else bad_value(k, v);
       }},
      {"conv_maps", [](TrainConfig& c, const std::string& k, const std::string& v) { c.conv_maps = parse_int<std::size_t>(k, v); }},
      {"std_convention",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         if (v == "population") c.std_convention = StdConvention::Population;
         else if (v == "sample") c.std_convention = StdConvention::Sample;
         else bad_value(k, v);
       }},
      {"threads", [](TrainConfig& c, const std::string& k, const std::string& v) { c.threads = parse_int<std::size_t>(k, v); }},
  };
  return table;
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidConfig, what);
  };
  require(epochs >= 0, "epochs must be >= 0");
  require(batch_size >= 1, "batch_size must be positive");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(window_len >= 1, "window_len must be positive");
  require(shrinkage >= 0.0, "shrinkage must be >= 0");
  require(bimap_layers >= 1, "bimap_layers must be positive");
  require(bimap_widths.empty() || bimap_widths.size() == static_cast<std::size_t>(bimap_layers),
          "bimap_widths needs one entry per layer");
  for (std::size_t i = 0; i < bimap_widths.size(); ++i) {
    require(bimap_widths[i] >= 1, "bimap widths must be positive");
    require(i == 0 || bimap_widths[i] <= bimap_widths[i - 1], "bimap widths must not increase");
  }
  require(reeig_epsilon > 0.0, "reeig_epsilon must be positive");
  require(karcher_iterations >= 1, "karcher_iterations must be positive");
  require(karcher_tolerance >= 0.0, "karcher_tolerance must be >= 0");
  require(rbn_momentum >= 0.0 && rbn_momentum < 1.0, "rbn_momentum must lie in [0, 1)");
  require(m >= 1, "m must be positive");
  require(heads >= 1, "heads must be positive");
  require(selection_max_iters >= 0, "selection_max_iters must be >= 0");
  require(selection_tol >= 0.0, "selection_tol must be >= 0");
  require(conv_maps >= 1, "conv_maps must be positive");
  require(threads >= 1, "threads must be positive");
  require(!bands.bands.empty(), "bands must not be empty");
  require(bands.filter_order >= 1, "filter_order must be positive");
  require(bands.stopband_atten_db > 0.0, "stopband_atten_db must be positive");
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig config;
  std::set<std::string> seen;
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw Error(ErrorCode::InvalidConfig, "duplicate key '" + key + "'");
    it->second(config, key, value);
  }
  config.validate();
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const TrainConfig& c) {
  std::ostringstream out;
  out << "epochs = " << c.epochs << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "learning_rate = " << format_double(c.learning_rate) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "bands = ";
  for (std::size_t i = 0; i < c.bands.bands.size(); ++i) {
    out << (i ? "," : "") << format_double(c.bands.bands[i].low_hz) << "-" << format_double(c.bands.bands[i].high_hz);
  }
  out << "\n";
  out << "filter_order = " << c.bands.filter_order << "\n";
  out << "stopband_atten_db = " << format_double(c.bands.stopband_atten_db) << "\n";
  out << "window_len = " << c.window_len << "\n";
  out << "shrinkage = " << format_double(c.shrinkage) << "\n";
  out << "bimap_layers = " << c.bimap_layers << "\n";
  out << "bimap_widths = ";
  for (std::size_t i = 0; i < c.bimap_widths.size(); ++i) out << (i ? "," : "") << c.bimap_widths[i];
  out << "\n";
  out << "reeig_epsilon = " << format_double(c.reeig_epsilon) << "\n";
  out << "karcher_iterations = " << c.karcher_iterations << "\n";
  out << "karcher_tolerance = " << format_double(c.karcher_tolerance) << "\n";
  out << "rbn_momentum = " << format_double(c.rbn_momentum) << "\n";
  out << "rbn_bias = " << (c.rbn_bias ? "true" : "false") << "\n";
  out << "m = " << c.m << "\n";
  out << "heads = " << c.heads << "\n";
  out << "selection_max_iters = " << c.selection_max_iters << "\n";
  out << "selection_tol = " << format_double(c.selection_tol) << "\n";
  out << "selection_rule = " << (c.selection_rule == ChannelRule::RowNorm ? "row_norm" : "argmax_entry") << "\n";
  out << "conv_maps = " << c.conv_maps << "\n";
  out << "std_convention = " << (c.std_convention == StdConvention::Population ? "population" : "sample") << "\n";
  out << "threads = " << c.threads << "\n";
  return out.str();
}

}  // namespace lgl
