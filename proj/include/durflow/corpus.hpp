#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "durflow/encoder.hpp"
#include "durflow/random.hpp"

namespace durflow {

enum class Style { read, spontaneous };

/// "read" or "spont".
const char* to_string(Style style);
/// Accepts "read", "spont" and "spontaneous".
Style parse_style(const std::string& text);

struct LogNormalMode {
  double weight = 1.0;
  double mu = 0.0;  // log of the median frame count
  double sigma = 0.1;

  bool operator==(const LogNormalMode&) const = default;
};

/// Duration law of one token class: a lognormal mixture, rounded half away
/// from zero and floored at min_frames.
struct ClassLaw {
  int token = kFirstPhone;
  double frequency = 1.0;  // relative draw weight among phone classes
  int min_frames = 1;
  std::vector<LogNormalMode> modes;

  bool multimodal() const { return modes.size() > 1; }
  bool operator==(const ClassLaw&) const = default;
};

/// Blanks are 0 frames with probability p_zero, else uniform on [min, max].
struct BlankLaw {
  double p_zero = 0.8;
  int min_frames = 1;
  int max_frames = 2;

  bool operator==(const BlankLaw&) const = default;
};

struct CorpusSpec {
  Style style = Style::read;
  int vocab_size = 24;
  int num_sentences = 1000;  // training split size
  int min_phones = 10;
  int max_phones = 30;
  std::uint64_t seed = 0;
  std::vector<ClassLaw> classes;  // phone classes, then PAUSE/FILLER when used
  double pause_prob = 0.0;
  double filler_prob = 0.0;
  BlankLaw blank;

  static CorpusSpec read_default(std::uint64_t seed);
  static CorpusSpec spontaneous_default(std::uint64_t seed);
  static CorpusSpec default_for(Style style, std::uint64_t seed);

  /// Throws std::invalid_argument on sigma <= 0, mode weights not summing to
  /// 1, probabilities outside [0, 1], tokens outside the vocabulary, or a
  /// missing PAUSE/FILLER law when insertion is enabled.
  void validate() const;

  std::vector<int> phone_tokens() const;
  const ClassLaw& law(int token) const;
  bool has_law(int token) const;

  bool operator==(const CorpusSpec&) const = default;
};

enum class Split { train, validation };

const char* to_string(Split split);

inline constexpr int kValidationSentences = 100;

struct Sentence {
  std::string id;
  PhoneSequence phones;    // blank-interleaved
  std::vector<int> durations;  // one per interleaved position

  bool operator==(const Sentence&) const = default;
};

struct DurationCorpus {
  CorpusSpec spec;
  Split split = Split::train;
  std::vector<Sentence> sentences;

  bool operator==(const DurationCorpus&) const = default;
};

/// Deterministic in the spec. Sentence i of a split draws from its own
/// stream derived from (seed, split, i). The validation split always holds
/// kValidationSentences sentences.
DurationCorpus generate(const CorpusSpec& spec, Split split = Split::train);

/// Draws one duration from a class law.
int draw_duration(const ClassLaw& law, Rng& rng);

class CorpusParseError : public std::runtime_error {
 public:
  CorpusParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

void write_corpus(std::ostream& out, const DurationCorpus& corpus);
DurationCorpus read_corpus(std::istream& in, const std::string& source = "<stream>");

void save_corpus(const DurationCorpus& corpus, const std::filesystem::path& path);
DurationCorpus load_corpus(const std::filesystem::path& path);

struct CorpusSummary {
  std::size_t sentences = 0;
  std::size_t positions = 0;
  std::size_t phones = 0;
  std::size_t pauses = 0;
  std::size_t fillers = 0;
  std::size_t total_frames = 0;
  double mean_duration = 0.0;
  double pooled_std = 0.0;  // over all positions
};

CorpusSummary summarize(const DurationCorpus& corpus);

}  // namespace durflow
