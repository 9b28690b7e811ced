#include "durflow/corpus.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "durflow/text.hpp"

namespace durflow {

const char* to_string(Style style) { return style == Style::read ? "read" : "spont"; }

Style parse_style(const std::string& text) {
  if (text == "read") return Style::read;
  if (text == "spont" || text == "spontaneous") return Style::spontaneous;
  throw std::invalid_argument("unknown style '" + text + "' (expected read or spont)");
}

const char* to_string(Split split) { return split == Split::train ? "train" : "validation"; }

// ---------------------------------------------------------------------------
// Default specs

namespace {

constexpr int kPhoneClasses = 20;
constexpr double kShortestMedian = 2.5;
constexpr double kLongestMedian = 9.0;

std::vector<ClassLaw> regular_phone_classes(double sigma) {
  std::vector<ClassLaw> out;
  for (int i = 0; i < kPhoneClasses; ++i) {
    const double frac = static_cast<double>(i) / (kPhoneClasses - 1);
    const double median = kShortestMedian * std::pow(kLongestMedian / kShortestMedian, frac);
    out.push_back(ClassLaw{kFirstPhone + i, 1.0, 1, {LogNormalMode{1.0, std::log(median), sigma}}});
  }
  return out;
}

}  // namespace

CorpusSpec CorpusSpec::read_default(std::uint64_t seed) {
  CorpusSpec spec;
  spec.style = Style::read;
  spec.seed = seed;
  spec.classes = regular_phone_classes(0.1);
  return spec;
}

CorpusSpec CorpusSpec::spontaneous_default(std::uint64_t seed) {
  CorpusSpec spec;
  spec.style = Style::spontaneous;
  spec.seed = seed;
  spec.classes = regular_phone_classes(0.1);
  // Bimodal class: either clipped short or drawn out, with equal odds.
  spec.classes.push_back(ClassLaw{kFirstPhone + kPhoneClasses, 2.0, 1,
                                  {LogNormalMode{0.5, std::log(2.0), 0.1}, LogNormalMode{0.5, std::log(12.0), 0.1}}});
  spec.classes.push_back(ClassLaw{kPause, 0.0, 0, {LogNormalMode{1.0, std::log(15.0), 0.8}}});
  spec.classes.push_back(ClassLaw{kFiller, 0.0, 1, {LogNormalMode{1.0, std::log(20.0), 0.3}}});
  spec.pause_prob = 0.15;
  spec.filler_prob = 0.08;
  return spec;
}

CorpusSpec CorpusSpec::default_for(Style style, std::uint64_t seed) {
  return style == Style::read ? read_default(seed) : spontaneous_default(seed);
}

void CorpusSpec::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("corpus spec: " + what); };
  if (vocab_size <= kFirstPhone) fail("vocab_size must exceed the reserved ids");
  if (num_sentences < 0) fail("num_sentences must be >= 0");
  if (min_phones < 1 || max_phones < min_phones) fail("phone length range must satisfy 1 <= min <= max");
  if (pause_prob < 0.0 || pause_prob > 1.0) fail("pause_prob outside [0, 1]");
  if (filler_prob < 0.0 || filler_prob > 1.0) fail("filler_prob outside [0, 1]");
  if (blank.p_zero < 0.0 || blank.p_zero > 1.0) fail("blank p_zero outside [0, 1]");
  if (blank.min_frames < 1 || blank.max_frames < blank.min_frames) fail("blank frame range invalid");
  double phone_weight = 0.0;
  for (const auto& law : classes) {
    const std::string name = "class " + std::to_string(law.token);
    if (law.token < 0 || law.token >= vocab_size || law.token == kBlank) fail(name + ": token outside vocabulary");
    if (law.modes.empty()) fail(name + ": no modes");
    if (law.min_frames < 0) fail(name + ": min_frames must be >= 0");
    if (law.frequency < 0.0) fail(name + ": negative frequency");
    double total = 0.0;
    for (const auto& m : law.modes) {
      if (!(m.sigma > 0.0)) fail(name + ": sigma must be positive");
      if (!(m.weight >= 0.0)) fail(name + ": negative mode weight");
      if (!std::isfinite(m.mu)) fail(name + ": mu must be finite");
      total += m.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) fail(name + ": mode weights sum to " + std::to_string(total));
    if (law.token >= kFirstPhone) phone_weight += law.frequency;
  }
  if (!(phone_weight > 0.0)) fail("no phone class with positive frequency");
  if (pause_prob > 0.0 && !has_law(kPause)) fail("pause insertion enabled without a PAUSE law");
  if (filler_prob > 0.0 && !has_law(kFiller)) fail("filler insertion enabled without a FILLER law");
}

std::vector<int> CorpusSpec::phone_tokens() const {
  std::vector<int> out;
  for (const auto& law : classes) {
    if (law.token >= kFirstPhone) out.push_back(law.token);
  }
  return out;
}

bool CorpusSpec::has_law(int token) const {
  for (const auto& law : classes) {
    if (law.token == token) return true;
  }
  return false;
}

const ClassLaw& CorpusSpec::law(int token) const {
  for (const auto& law : classes) {
    if (law.token == token) return law;
  }
  throw std::out_of_range("corpus spec: no duration law for token " + std::to_string(token));
}

// ---------------------------------------------------------------------------
// Generation

int draw_duration(const ClassLaw& law, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t mode = 0;
  if (law.modes.size() > 1) {
    double u = uniform(rng);
    while (mode + 1 < law.modes.size() && u >= law.modes[mode].weight) {
      u -= law.modes[mode].weight;
      ++mode;
    }
  }
  const auto& m = law.modes[mode];
  const double frames = std::round(std::exp(m.mu + m.sigma * normal(rng)));
  const double capped = std::min(frames, 1e6);
  return std::max(law.min_frames, static_cast<int>(capped));
}

namespace {

constexpr std::uint64_t kValidationStream = std::uint64_t{1} << 32;

Sentence generate_sentence(const CorpusSpec& spec, Split split, std::size_t index,
                           const std::vector<const ClassLaw*>& phones, const std::vector<double>& cumulative) {
  const std::uint64_t stream = (split == Split::validation ? kValidationStream : 0) + index;
  Rng rng = make_rng(spec.seed, stream);
  std::uniform_int_distribution<int> length_dist(spec.min_phones, spec.max_phones);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  const int length = length_dist(rng);
  std::vector<int> tokens;
  for (int i = 0; i < length; ++i) {
    if (i > 0) {
      if (uniform(rng) < spec.pause_prob) tokens.push_back(kPause);
      if (uniform(rng) < spec.filler_prob) tokens.push_back(kFiller);
    }
    const double u = uniform(rng) * cumulative.back();
    std::size_t c = 0;
    while (c + 1 < cumulative.size() && u >= cumulative[c]) ++c;
    tokens.push_back(phones[c]->token);
  }

  Sentence s;
  s.id = std::string(split == Split::train ? "tr" : "va") + std::to_string(index);
  s.phones = PhoneSequence{interleave_blanks(tokens), true};
  s.durations.reserve(s.phones.ids.size());
  std::uniform_int_distribution<int> blank_frames(spec.blank.min_frames, spec.blank.max_frames);
  for (int token : s.phones.ids) {
    if (token == kBlank) {
      s.durations.push_back(uniform(rng) < spec.blank.p_zero ? 0 : blank_frames(rng));
    } else {
      s.durations.push_back(draw_duration(spec.law(token), rng));
    }
  }
  return s;
}

}  // namespace

DurationCorpus generate(const CorpusSpec& spec, Split split) {
  spec.validate();
  std::vector<const ClassLaw*> phones;
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& law : spec.classes) {
    if (law.token < kFirstPhone || law.frequency <= 0.0) continue;
    acc += law.frequency;
    phones.push_back(&law);
    cumulative.push_back(acc);
  }
  DurationCorpus corpus{spec, split, {}};
  const std::size_t n = split == Split::train ? static_cast<std::size_t>(spec.num_sentences)
                                              : static_cast<std::size_t>(kValidationSentences);
  corpus.sentences.reserve(n);
  for (std::size_t i = 0; i < n; ++i) corpus.sentences.push_back(generate_sentence(spec, split, i, phones, cumulative));
  return corpus;
}

// ---------------------------------------------------------------------------
// File format

CorpusParseError::CorpusParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error("corpus " + source + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

class LineParser {
 public:
  LineParser(std::string source, std::size_t line) : source_(std::move(source)), line_(line) {}

  [[noreturn]] void fail(const std::string& what) const { throw CorpusParseError(source_, line_, what); }

  template <typename T>
  T number(const std::string& text, const char* what) const {
    T v{};
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
      fail(std::string("bad ") + what + " '" + text + "'");
    }
    return v;
  }

  std::map<std::string, std::string> key_values(const std::vector<std::string>& items, std::size_t from) const {
    std::map<std::string, std::string> kv;
    for (std::size_t i = from; i < items.size(); ++i) {
      auto eq = items[i].find('=');
      if (eq == std::string::npos) fail("expected key=value, got '" + items[i] + "'");
      kv[items[i].substr(0, eq)] = items[i].substr(eq + 1);
    }
    return kv;
  }

  const std::string& get(const std::map<std::string, std::string>& kv, const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) fail("missing field '" + key + "'");
    return it->second;
  }

  std::vector<int> ints(const std::string& text, const char* what) const {
    std::vector<int> out;
    for (const auto& w : words(text)) out.push_back(number<int>(w, what));
    return out;
  }

 private:
  std::string source_;
  std::size_t line_;
};

}  // namespace

void write_corpus(std::ostream& out, const DurationCorpus& corpus) {
  const auto& spec = corpus.spec;
  out << "#durcorpus v1 style=" << to_string(spec.style) << " vocab=" << spec.vocab_size << " seed=" << spec.seed
      << '\n';
  out << "#split " << to_string(corpus.split) << '\n';
  out << "#spec num_sentences=" << spec.num_sentences << " min_phones=" << spec.min_phones
      << " max_phones=" << spec.max_phones << " pause_prob=" << format_double(spec.pause_prob)
      << " filler_prob=" << format_double(spec.filler_prob) << " blank_p_zero=" << format_double(spec.blank.p_zero)
      << " blank_min=" << spec.blank.min_frames << " blank_max=" << spec.blank.max_frames << '\n';
  for (const auto& law : spec.classes) {
    out << "#class token=" << law.token << " frequency=" << format_double(law.frequency) << " min_frames=" << law.min_frames
        << " modes=";
    for (std::size_t i = 0; i < law.modes.size(); ++i) {
      if (i) out << ',';
      out << format_double(law.modes[i].weight) << ':' << format_double(law.modes[i].mu) << ':' << format_double(law.modes[i].sigma);
    }
    out << '\n';
  }
  for (const auto& s : corpus.sentences) {
    out << s.id << '\t';
    for (std::size_t i = 0; i < s.phones.ids.size(); ++i) out << (i ? " " : "") << s.phones.ids[i];
    out << '\t';
    for (std::size_t i = 0; i < s.durations.size(); ++i) out << (i ? " " : "") << s.durations[i];
    out << '\n';
  }
}

DurationCorpus read_corpus(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw CorpusParseError(source, 1, "empty file, expected #durcorpus header");
  ++lineno;
  DurationCorpus corpus;
  {
    LineParser p(source, lineno);
    auto items = words(line);
    if (items.size() < 2 || items[0] != "#durcorpus") p.fail("expected '#durcorpus v1 ...' header");
    if (items[1] != "v1") p.fail("unsupported version '" + items[1] + "'");
    auto kv = p.key_values(items, 2);
    Style style;
    try {
      style = parse_style(p.get(kv, "style"));
    } catch (const std::invalid_argument& e) {
      p.fail(e.what());
    }
    const auto seed = p.number<std::uint64_t>(p.get(kv, "seed"), "seed");
    corpus.spec = CorpusSpec::default_for(style, seed);
    corpus.spec.vocab_size = p.number<int>(p.get(kv, "vocab"), "vocab");
  }
  bool saw_class = false;
  while (std::getline(in, line)) {
    ++lineno;
    LineParser p(source, lineno);
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto items = words(line);
      if (items[0] == "#split") {
        if (items.size() != 2) p.fail("expected '#split <train|validation>'");
        if (items[1] == "train") {
          corpus.split = Split::train;
        } else if (items[1] == "validation") {
          corpus.split = Split::validation;
        } else {
          p.fail("unknown split '" + items[1] + "'");
        }
      } else if (items[0] == "#spec") {
        auto kv = p.key_values(items, 1);
        auto& spec = corpus.spec;
        spec.num_sentences = p.number<int>(p.get(kv, "num_sentences"), "num_sentences");
        spec.min_phones = p.number<int>(p.get(kv, "min_phones"), "min_phones");
        spec.max_phones = p.number<int>(p.get(kv, "max_phones"), "max_phones");
        spec.pause_prob = p.number<double>(p.get(kv, "pause_prob"), "pause_prob");
        spec.filler_prob = p.number<double>(p.get(kv, "filler_prob"), "filler_prob");
        spec.blank.p_zero = p.number<double>(p.get(kv, "blank_p_zero"), "blank_p_zero");
        spec.blank.min_frames = p.number<int>(p.get(kv, "blank_min"), "blank_min");
        spec.blank.max_frames = p.number<int>(p.get(kv, "blank_max"), "blank_max");
      } else if (items[0] == "#class") {
        if (!saw_class) corpus.spec.classes.clear();
        saw_class = true;
        auto kv = p.key_values(items, 1);
        ClassLaw law;
        law.token = p.number<int>(p.get(kv, "token"), "token");
        law.frequency = p.number<double>(p.get(kv, "frequency"), "frequency");
        law.min_frames = p.number<int>(p.get(kv, "min_frames"), "min_frames");
        for (const auto& mode : split_on(p.get(kv, "modes"), ',')) {
          auto parts = split_on(mode, ':');
          if (parts.size() != 3) p.fail("mode must be weight:mu:sigma, got '" + mode + "'");
          law.modes.push_back(LogNormalMode{p.number<double>(parts[0], "mode weight"),
                                            p.number<double>(parts[1], "mode mu"),
                                            p.number<double>(parts[2], "mode sigma")});
        }
        corpus.spec.classes.push_back(law);
      } else {
        p.fail("unknown directive '" + items[0] + "'");
      }
      continue;
    }
    auto fields = split_on(line, '\t');
    if (fields.size() != 3) {
      p.fail("expected <id>\\t<tokens>\\t<durations>, found " + std::to_string(fields.size()) + " field(s)");
    }
    Sentence s;
    s.id = fields[0];
    if (s.id.empty()) p.fail("empty sentence id");
    s.phones.ids = p.ints(fields[1], "token id");
    s.durations = p.ints(fields[2], "duration");
    if (s.phones.ids.size() != s.durations.size()) {
      p.fail(std::to_string(s.phones.ids.size()) + " tokens but " + std::to_string(s.durations.size()) +
             " durations");
    }
    for (std::size_t i = 0; i < s.phones.ids.size(); ++i) {
      const int id = s.phones.ids[i];
      if (id < 0 || id >= corpus.spec.vocab_size) p.fail("token id " + std::to_string(id) + " outside vocabulary");
      if (s.durations[i] < 0) p.fail("negative duration at position " + std::to_string(i));
      if (s.durations[i] == 0 && id != kBlank && id != kPause) {
        p.fail("zero duration on non-blank, non-pause token at position " + std::to_string(i));
      }
    }
    s.phones.interleaved = is_interleaved(s.phones.ids);
    if (!s.phones.interleaved) p.fail("token sequence is not blank-interleaved");
    corpus.sentences.push_back(std::move(s));
  }
  if (corpus.split == Split::validation && corpus.sentences.size() != static_cast<std::size_t>(kValidationSentences)) {
    throw CorpusParseError(source, lineno,
                           "validation split holds " + std::to_string(corpus.sentences.size()) + " sentences, expected " +
                               std::to_string(kValidationSentences));
  }
  return corpus;
}

void save_corpus(const DurationCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("corpus " + path.string() + ": cannot open for writing");
  write_corpus(out, corpus);
  if (!out) throw std::runtime_error("corpus " + path.string() + ": write failed");
}

DurationCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("corpus " + path.string() + ": cannot open");
  return read_corpus(in, path.string());
}

CorpusSummary summarize(const DurationCorpus& corpus) {
  CorpusSummary s;
  s.sentences = corpus.sentences.size();
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& sentence : corpus.sentences) {
    for (std::size_t i = 0; i < sentence.durations.size(); ++i) {
      const int id = sentence.phones.ids[i];
      const double d = sentence.durations[i];
      ++s.positions;
      s.phones += id >= kFirstPhone ? 1 : 0;
      s.pauses += id == kPause ? 1 : 0;
      s.fillers += id == kFiller ? 1 : 0;
      s.total_frames += static_cast<std::size_t>(sentence.durations[i]);
      sum += d;
      sum_sq += d * d;
    }
  }
  if (s.positions > 0) {
    const double n = static_cast<double>(s.positions);
    s.mean_duration = sum / n;
    s.pooled_std = std::sqrt(std::max(0.0, sum_sq / n - s.mean_duration * s.mean_duration));
  }
  return s;
}

}  // namespace durflow
