#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "durflow/corpus.hpp"
#include "durflow/duration.hpp"

namespace durflow {

/// Worker count for evaluation fan-out: DURFLOW_THREADS when set to a
/// positive integer, else the hardware concurrency.
std::size_t worker_count();

/// Runs fn(0..n-1) on up to worker_count() threads. Each index runs exactly
/// once; the first exception thrown is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

inline const std::vector<int> kDefaultResidualNfe = {1, 2, 4, 8, 10, 16, 32};
inline const std::vector<int> kDefaultBenchNfe = {1, 2, 4, 8, 10, 16, 20, 32};

struct CurveSeries {
  std::string model;
  std::string corpus;
  std::vector<double> residuals;  // one per nfe

  bool operator==(const CurveSeries&) const = default;
};

struct ResidualCurve {
  std::vector<int> nfe;
  std::vector<CurveSeries> series;

  /// Arithmetic mean over the corpora of `model` at each nfe.
  std::vector<double> aggregate(const std::string& model) const;
  /// Appends the series of another curve with the same nfe list.
  void merge(const ResidualCurve& other);

  bool operator==(const ResidualCurve&) const = default;
};

/// Mean quantisation residual over every unmasked validation position, per
/// nfe. FM samples sentence i with seed derive_seed(opts.seed, i); DET is
/// evaluated once and the value replicated. Throws std::invalid_argument on
/// an untrained model or an unsorted/empty nfe list.
ResidualCurve residual_vs_nfe(const DurationModel& model, const DurationCorpus& validation,
                              std::span<const int> nfe_list, const SampleOptions& opts,
                              const std::string& model_label, const std::string& corpus_label);

/// Integer durations grouped by token id.
using DurationsByClass = std::map<int, std::vector<int>>;

DurationsByClass reference_durations(const DurationCorpus& corpus);

/// Samples every sentence `realisations` times (realisation r of sentence i
/// uses seed derive_seed(derive_seed(opts.seed, i), r)) and groups the
/// rounded durations by token.
DurationsByClass collect_durations(const DurationModel& model, const DurationCorpus& corpus,
                                   const SampleOptions& opts, int realisations = 1);

struct ClassStats {
  int token = 0;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, frames
  std::vector<double> mode_freqs;  // declared multimodal classes only

  bool operator==(const ClassStats&) const = default;
};

struct DistStats {
  std::string model;
  std::string corpus;
  std::vector<ClassStats> classes;  // ascending token id
  std::optional<double> pause_std;

  const ClassStats& at(int token) const;
  bool operator==(const DistStats&) const = default;
};

/// Per-class statistics. Mode frequencies come from nearest-mode assignment
/// in the log domain (zero frames count as log_target(0)). Throws
/// std::invalid_argument when a class has no samples.
DistStats dist_stats(const DurationsByClass& durations, const CorpusSpec& spec,
                     const std::string& model_label = "", const std::string& corpus_label = "");

struct BenchPoint {
  int nfe = 0;
  double median_ms = 0.0;
  double ms_per_nfe = 0.0;
};

struct BenchResult {
  std::string model;
  std::vector<BenchPoint> points;
  double slope_ms_per_nfe = 0.0;  // least-squares fit of median_ms against nfe

  const BenchPoint& at(int nfe) const;
};

struct BenchOptions {
  int repetitions = 5;
  std::size_t max_sentences = 20;
  double temperature = 0.667;
  std::uint64_t seed = 0;
};

/// Wall time of sampling the first max_sentences validation sentences, with
/// conditioning precomputed. One warm-up pass precedes timing; the median
/// over repetitions is reported. DET is timed once and replicated across nfe.
BenchResult bench_sampling(const DurationModel& model, const DurationCorpus& validation,
                           std::span<const int> nfe_list, const BenchOptions& opts,
                           const std::string& model_label);

/// Writes residual.csv, dist.csv and bench.csv into `dir`, creating it when
/// missing. Throws std::runtime_error when a file cannot be written.
void write_report(const ResidualCurve& curves, std::span<const DistStats> stats,
                  std::span<const BenchResult> bench, const std::filesystem::path& dir);

}  // namespace durflow
