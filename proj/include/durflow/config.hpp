#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "durflow/corpus.hpp"
#include "durflow/duration.hpp"

namespace durflow {

/// Settings shared by the command-line tools. Every field has a default; a
/// key=value file may override any subset, and explicit flags override the
/// file.
struct RunConfig {
  Style style = Style::read;
  ModelKind model = ModelKind::det;
  int steps = 5000;
  int batch = 8;
  double lr = 1e-3;
  int nfe = 10;
  double temperature = 0.667;
  int min_duration = 0;
  int realisations = 0;  // 0: 5 for FM, 1 for DET
  int num_sentences = 1000;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";

  /// Throws std::invalid_argument on an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);
  /// Ordered key/value view; `set` accepts every key it returns.
  std::vector<std::pair<std::string, std::string>> entries() const;

  SampleOptions sample_options() const;
  int realisations_for(ModelKind kind) const;

  /// Flat key=value lines; blank lines and lines starting with '#' are
  /// skipped. Errors name the file and line.
  void apply_file(const std::filesystem::path& path);
  void apply_stream(std::istream& in, const std::string& source);
  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
};

}  // namespace durflow
