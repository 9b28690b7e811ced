#include "durflow/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "durflow/text.hpp"

namespace durflow {

std::size_t worker_count() {
  if (const char* env = std::getenv("DURFLOW_THREADS")) {
    if (auto n = parse_number<std::size_t>(env); n && *n > 0) return *n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Residual curves

std::vector<double> ResidualCurve::aggregate(const std::string& model) const {
  std::vector<double> out(nfe.size(), 0.0);
  std::size_t corpora = 0;
  for (const auto& s : series) {
    if (s.model != model) continue;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s.residuals[i];
    ++corpora;
  }
  if (corpora == 0) throw std::invalid_argument("no residual series for model '" + model + "'");
  for (auto& v : out) v /= static_cast<double>(corpora);
  return out;
}

void ResidualCurve::merge(const ResidualCurve& other) {
  if (series.empty() && nfe.empty()) nfe = other.nfe;
  if (other.nfe != nfe) throw std::invalid_argument("cannot merge residual curves with different nfe lists");
  series.insert(series.end(), other.series.begin(), other.series.end());
}

namespace {

void check_trained(const DurationModel& model) {
  if (model.trained_steps() <= 0) {
    throw std::invalid_argument("model " + model.id() + " is untrained");
  }
}

std::vector<ConditioningSequence> encode_all(const DurationModel& model, const DurationCorpus& corpus,
                                             std::size_t limit) {
  const std::size_t n = std::min(limit, corpus.sentences.size());
  std::vector<ConditioningSequence> conds(n);
  parallel_for(n, [&](std::size_t i) { conds[i] = model.encode(corpus.sentences[i].phones); });
  return conds;
}

}  // namespace

ResidualCurve residual_vs_nfe(const DurationModel& model, const DurationCorpus& validation,
                              std::span<const int> nfe_list, const SampleOptions& opts,
                              const std::string& model_label, const std::string& corpus_label) {
  check_trained(model);
  if (nfe_list.empty()) throw std::invalid_argument("residual_vs_nfe: empty nfe list");
  for (std::size_t i = 0; i < nfe_list.size(); ++i) {
    if (nfe_list[i] < 1) throw std::invalid_argument("residual_vs_nfe: nfe must be >= 1");
    if (i > 0 && nfe_list[i] <= nfe_list[i - 1]) {
      throw std::invalid_argument("residual_vs_nfe: nfe list must be strictly ascending");
    }
  }
  const auto conds = encode_all(model, validation, validation.sentences.size());

  // Residual sum and position count per sentence, summed in index order so
  // the result does not depend on the worker count.
  auto pooled = [&](int nfe) {
    std::vector<double> sums(conds.size(), 0.0);
    std::vector<std::size_t> counts(conds.size(), 0);
    parallel_for(conds.size(), [&](std::size_t i) {
      SampleOptions o = opts;
      o.nfe = nfe;
      o.seed = derive_seed(opts.seed, i);
      LogDurations ld = predict_log_durations(model, conds[i], o);
      std::size_t n = 0;
      for (auto m : ld.mask) n += m ? 1 : 0;
      counts[i] = n;
      sums[i] = n > 0 ? quantisation_residual(ld) * static_cast<double>(n) : 0.0;
    });
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < conds.size(); ++i) {
      total += sums[i];
      n += counts[i];
    }
    if (n == 0) throw std::invalid_argument("residual_vs_nfe: validation set has no unmasked positions");
    return total / static_cast<double>(n);
  };

  ResidualCurve curve;
  curve.nfe.assign(nfe_list.begin(), nfe_list.end());
  CurveSeries s{model_label, corpus_label, {}};
  if (model.kind() == ModelKind::det) {
    s.residuals.assign(nfe_list.size(), pooled(1));
  } else {
    for (int nfe : nfe_list) s.residuals.push_back(pooled(nfe));
  }
  curve.series.push_back(std::move(s));
  return curve;
}

// ---------------------------------------------------------------------------
// Distribution statistics

DurationsByClass reference_durations(const DurationCorpus& corpus) {
  DurationsByClass out;
  for (const auto& s : corpus.sentences) {
    for (std::size_t i = 0; i < s.durations.size(); ++i) out[s.phones.ids[i]].push_back(s.durations[i]);
  }
  return out;
}

DurationsByClass collect_durations(const DurationModel& model, const DurationCorpus& corpus,
                                   const SampleOptions& opts, int realisations) {
  if (realisations < 1) throw std::invalid_argument("collect_durations: realisations must be >= 1");
  check_trained(model);
  const auto conds = encode_all(model, corpus, corpus.sentences.size());
  std::vector<std::vector<std::vector<int>>> frames(conds.size());
  parallel_for(conds.size(), [&](std::size_t i) {
    for (int r = 0; r < realisations; ++r) {
      SampleOptions o = opts;
      o.seed = derive_seed(derive_seed(opts.seed, i), static_cast<std::uint64_t>(r));
      frames[i].push_back(to_frames(predict_log_durations(model, conds[i], o), opts.min_duration));
    }
  });
  DurationsByClass out;
  for (std::size_t i = 0; i < conds.size(); ++i) {
    const auto& ids = corpus.sentences[i].phones.ids;
    for (const auto& f : frames[i]) {
      for (std::size_t p = 0; p < f.size(); ++p) {
        if (conds[i].mask[p]) out[ids[p]].push_back(f[p]);
      }
    }
  }
  return out;
}

const ClassStats& DistStats::at(int token) const {
  for (const auto& c : classes) {
    if (c.token == token) return c;
  }
  throw std::out_of_range("no statistics for token " + std::to_string(token));
}

DistStats dist_stats(const DurationsByClass& durations, const CorpusSpec& spec, const std::string& model_label,
                     const std::string& corpus_label) {
  DistStats out;
  out.model = model_label;
  out.corpus = corpus_label;
  for (const auto& [token, values] : durations) {
    if (values.empty()) throw std::invalid_argument("dist_stats: class " + std::to_string(token) + " is empty");
    ClassStats c;
    c.token = token;
    c.count = values.size();
    double sum = 0.0;
    for (int v : values) sum += v;
    c.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (int v : values) ss += (v - c.mean) * (v - c.mean);
    c.std = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
    if (spec.has_law(token) && spec.law(token).multimodal()) {
      const auto& modes = spec.law(token).modes;
      std::vector<std::size_t> hits(modes.size(), 0);
      for (int v : values) {
        const double x = log_target(v);
        std::size_t best = 0;
        for (std::size_t m = 1; m < modes.size(); ++m) {
          if (std::abs(x - modes[m].mu) < std::abs(x - modes[best].mu)) best = m;
        }
        ++hits[best];
      }
      for (auto h : hits) c.mode_freqs.push_back(static_cast<double>(h) / static_cast<double>(values.size()));
    }
    if (token == kPause) out.pause_std = c.std;
    out.classes.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling benchmark

const BenchPoint& BenchResult::at(int nfe) const {
  for (const auto& p : points) {
    if (p.nfe == nfe) return p;
  }
  throw std::out_of_range("no benchmark point for nfe " + std::to_string(nfe));
}

BenchResult bench_sampling(const DurationModel& model, const DurationCorpus& validation,
                           std::span<const int> nfe_list, const BenchOptions& opts,
                           const std::string& model_label) {
  if (opts.repetitions < 1) throw std::invalid_argument("bench_sampling: repetitions must be >= 1");
  const auto conds = encode_all(model, validation, opts.max_sentences);
  if (conds.empty()) throw std::invalid_argument("bench_sampling: no sentences to time");

  auto time_pass = [&](int nfe) {
    SampleOptions o;
    o.nfe = nfe;
    o.temperature = opts.temperature;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < conds.size(); ++i) {
      o.seed = derive_seed(opts.seed, i);
      auto ld = predict_log_durations(model, conds[i], o);
      (void)ld;
    }
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  auto median = [](std::vector<double> times) {
    std::sort(times.begin(), times.end());
    const std::size_t mid = times.size() / 2;
    return times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
  };

  for (int nfe : nfe_list) {
    if (nfe < 1) throw std::invalid_argument("bench_sampling: nfe must be >= 1");
  }
  BenchResult result;
  result.model = model_label;
  const bool det = model.kind() == ModelKind::det;
  // Repetitions sweep the whole nfe list in turn, so a slow spell on a shared
  // machine lands on every point instead of a single one.
  const std::vector<int> timed = det ? std::vector<int>{1} : std::vector<int>(nfe_list.begin(), nfe_list.end());
  if (nfe_list.empty()) return result;
  std::vector<std::vector<double>> times(timed.size());
  time_pass(timed.front());  // warm-up
  for (int r = 0; r < opts.repetitions; ++r) {
    for (std::size_t j = 0; j < timed.size(); ++j) times[j].push_back(time_pass(timed[j]));
  }
  const double det_ms = det ? median(times.front()) : 0.0;
  for (std::size_t j = 0; j < nfe_list.size(); ++j) {
    BenchPoint p;
    p.nfe = nfe_list[j];
    p.median_ms = det ? det_ms : median(times[j]);
    // A DET prediction is a single function evaluation whatever the nfe.
    p.ms_per_nfe = det ? det_ms : p.median_ms / p.nfe;
    result.points.push_back(p);
  }
  if (!det && result.points.size() > 1) {
    double mx = 0.0, my = 0.0;
    for (const auto& p : result.points) {
      mx += p.nfe;
      my += p.median_ms;
    }
    mx /= static_cast<double>(result.points.size());
    my /= static_cast<double>(result.points.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& p : result.points) {
      sxy += (p.nfe - mx) * (p.median_ms - my);
      sxx += (p.nfe - mx) * (p.nfe - mx);
    }
    result.slope_ms_per_nfe = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Report

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void finish_csv(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void write_report(const ResidualCurve& curves, std::span<const DistStats> stats,
                  std::span<const BenchResult> bench, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create report directory " + dir.string() + ": " + ec.message());

  const auto residual_path = dir / "residual.csv";
  auto residual = open_csv(residual_path);
  residual << "model,corpus,nfe,mean_residual\n";
  for (const auto& s : curves.series) {
    for (std::size_t i = 0; i < curves.nfe.size(); ++i) {
      residual << s.model << ',' << s.corpus << ',' << curves.nfe[i] << ',' << format_double(s.residuals[i])
               << '\n';
    }
  }
  finish_csv(residual, residual_path);

  const auto dist_path = dir / "dist.csv";
  auto dist = open_csv(dist_path);
  dist << "model,corpus,class,mean,std,mode_freqs\n";
  for (const auto& d : stats) {
    for (const auto& c : d.classes) {
      dist << d.model << ',' << d.corpus << ',' << c.token << ',' << format_double(c.mean) << ','
           << format_double(c.std) << ',';
      for (std::size_t m = 0; m < c.mode_freqs.size(); ++m) {
        if (m > 0) dist << ';';
        dist << format_double(c.mode_freqs[m]);
      }
      dist << '\n';
    }
  }
  finish_csv(dist, dist_path);

  const auto bench_path = dir / "bench.csv";
  auto bench_out = open_csv(bench_path);
  bench_out << "model,nfe,median_ms,ms_per_nfe\n";
  for (const auto& b : bench) {
    for (const auto& p : b.points) {
      bench_out << b.model << ',' << p.nfe << ',' << format_double(p.median_ms) << ','
                << format_double(p.ms_per_nfe) << '\n';
    }
  }
  finish_csv(bench_out, bench_path);
}

}  // namespace durflow
