#include "durflow/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "durflow/text.hpp"

namespace durflow {

namespace {

template <typename T>
T parse_value(const std::string& key, const std::string& value) {
  auto v = parse_number<T>(value);
  if (!v) throw std::invalid_argument("config: bad value for " + key + ": '" + value + "'");
  return *v;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "style") {
    style = parse_style(value);
  } else if (key == "model") {
    model = parse_model_kind(value);
  } else if (key == "steps") {
    steps = parse_value<int>(key, value);
    if (steps < 1) throw std::invalid_argument("config: steps must be >= 1");
  } else if (key == "batch") {
    batch = parse_value<int>(key, value);
    if (batch < 1) throw std::invalid_argument("config: batch must be >= 1");
  } else if (key == "lr") {
    lr = parse_value<double>(key, value);
    if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be positive");
  } else if (key == "nfe") {
    nfe = parse_value<int>(key, value);
    if (nfe < 1) throw std::invalid_argument("config: nfe must be >= 1");
  } else if (key == "temperature") {
    temperature = parse_value<double>(key, value);
    if (!(temperature >= 0.0)) throw std::invalid_argument("config: temperature must be >= 0");
  } else if (key == "min_duration") {
    min_duration = parse_value<int>(key, value);
    if (min_duration != 0 && min_duration != 1) throw std::invalid_argument("config: min_duration must be 0 or 1");
  } else if (key == "realisations") {
    realisations = parse_value<int>(key, value);
    if (realisations < 0) throw std::invalid_argument("config: realisations must be >= 0");
  } else if (key == "num_sentences") {
    num_sentences = parse_value<int>(key, value);
    if (num_sentences < 1) throw std::invalid_argument("config: num_sentences must be >= 1");
  } else if (key == "seed") {
    seed = parse_value<std::uint64_t>(key, value);
  } else if (key == "out") {
    if (value.empty()) throw std::invalid_argument("config: out must not be empty");
    out = value;
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  return {
      {"style", to_string(style)},
      {"model", to_string(model)},
      {"steps", std::to_string(steps)},
      {"batch", std::to_string(batch)},
      {"lr", format_double(lr)},
      {"nfe", std::to_string(nfe)},
      {"temperature", format_double(temperature)},
      {"min_duration", std::to_string(min_duration)},
      {"realisations", std::to_string(realisations)},
      {"num_sentences", std::to_string(num_sentences)},
      {"seed", std::to_string(seed)},
      {"out", out.string()},
  };
}

SampleOptions RunConfig::sample_options() const {
  SampleOptions o;
  o.nfe = nfe;
  o.temperature = temperature;
  o.seed = seed;
  o.min_duration = min_duration;
  return o;
}

int RunConfig::realisations_for(ModelKind kind) const {
  if (realisations > 0) return realisations;
  return kind == ModelKind::fm ? 5 : 1;
}

void RunConfig::apply_stream(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(source + ":" + std::to_string(number) + ": expected key=value");
    }
    try {
      set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  apply_stream(in, path.string());
}

void RunConfig::write(std::ostream& out_stream) const {
  for (const auto& [k, v] : entries()) out_stream << k << '=' << v << '\n';
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  write(f);
  if (!f.flush()) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace durflow
