#include "mfg/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "mfg/hjb.hpp"
#include "mfg/ode.hpp"

namespace mfg {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_mix(std::uint64_t& h, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) {
    h ^= (v >> (8 * b)) & 0xffu;
    h *= kFnvPrime;
  }
}

double stimulus(const RateTensor& q, const CountState& s, int i, int j) {
  double acc = 0.0;
  for (int k = 0; k < s.counts.cols(); ++k) acc += q(i, j, k) * static_cast<double>(s.counts(i, k));
  return acc / static_cast<double>(s.N);
}

void push(std::vector<Transition>& out, int a, int b, int c, int d, double rate, Transition::Kind kind) {
  if (rate > 0.0) out.push_back({a, b, c, d, rate, kind});
}

}  // namespace

CountState CountState::from_density(const Matrix& x, std::int64_t N) {
  if (N < 1) throw std::invalid_argument("CountState: N must be positive");
  if ((x.array() < 0.0).any()) throw ConfigError("CountState: negative density entry");
  if (std::abs(x.sum() - 1.0) > Occupation::kMassTolerance)
    throw ConfigError("CountState: density does not sum to 1");

  CountState s;
  s.N = N;
  s.counts = CountMatrix::Zero(x.rows(), x.cols());
  const Eigen::Index size = x.size();
  std::vector<double> fraction(size);
  std::int64_t assigned = 0;
  for (Eigen::Index k = 0; k < size; ++k) {
    const double target = x.data()[k] * static_cast<double>(N);
    const double base = std::floor(target);
    s.counts.data()[k] = static_cast<std::int64_t>(base);
    fraction[k] = target - base;
    assigned += s.counts.data()[k];
  }
  std::vector<Eigen::Index> order(size);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fraction[a] > fraction[b]; });
  std::int64_t left = N - assigned;
  for (std::size_t r = 0; left > 0 && r < order.size(); ++r, --left) ++s.counts.data()[order[r]];
  // Floating error can overshoot by one agent; take it from the largest cell.
  while (left < 0) {
    Eigen::Index r = 0, c = 0;
    s.counts.maxCoeff(&r, &c);
    --s.counts(r, c);
    ++left;
  }
  return s;
}

Matrix CountState::density() const { return counts.cast<double>() / static_cast<double>(N); }

std::vector<Transition> enumerate_transitions(const CountState& s, const Control& u, const GameConfig& cfg) {
  using K = Transition::Kind;
  std::vector<Transition> out;
  const int n = cfg.n;
  const int m = cfg.m;
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      const double nij = static_cast<double>(s.counts(i, j));
      if (nij == 0.0) continue;
      if (i + 1 < n) {
        push(out, i, j, i + 1, j, nij * cfg.q_up(i, j), K::Pressure);
        if (cfg.delta_int != 0.0)
          push(out, i, j, i + 1, j, nij * cfg.delta_int * stimulus(cfg.q_up_evo, s, i, j), K::Interaction);
      }
      if (i > 0) {
        if (cfg.q_sink) {
          push(out, i, j, 0, j, nij * cfg.q_sink->rates(i, j), K::Sink);
          if (cfg.delta_int != 0.0)
            push(out, i, j, 0, j, nij * cfg.delta_int * stimulus(cfg.q_sink->evo, s, i, j), K::Sink);
        } else {
          push(out, i, j, i - 1, j, nij * cfg.q_down(i, j), K::Pressure);
          if (cfg.delta_int != 0.0)
            push(out, i, j, i - 1, j, nij * cfg.delta_int * stimulus(cfg.q_down_evo, s, i, j), K::Interaction);
        }
      }
      const int k = u.target(i, j);
      if (k != Control::kStay) push(out, i, j, i, k, nij * cfg.lambda, K::Decision);
    }
  }
  return out;
}

Policy Policy::fixed(Control u) { return {constant_control(std::move(u)), {}}; }

Policy Policy::from_payoff(const std::vector<double>& times, const std::vector<Matrix>& g,
                           const GameConfig& cfg) {
  if (times.size() < 2 || times.size() != g.size())
    throw std::invalid_argument("Policy::from_payoff: need matching times and payoffs");
  auto controls = std::make_shared<std::vector<Control>>();
  auto starts = std::make_shared<std::vector<double>>(times.begin(), times.end() - 1);
  Policy p;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    controls->push_back(optimal_control(0.5 * (g[k] + g[k + 1]), cfg));
    if (k > 0 && !(controls->at(k) == controls->at(k - 1))) p.change_times.push_back(times[k]);
  }
  p.control = [controls, starts](double t) {
    auto it = std::upper_bound(starts->begin(), starts->end(), t);
    const auto k = it == starts->begin() ? 0 : static_cast<std::size_t>(it - starts->begin() - 1);
    return controls->at(k);
  };
  return p;
}

SamplePath simulate(const CountState& s0, const Policy& policy, double T, double dt_out, std::uint64_t seed,
                    const GameConfig& cfg) {
  if (s0.counts.rows() != cfg.n || s0.counts.cols() != cfg.m)
    throw std::invalid_argument("simulate: state dimension mismatch");
  if (s0.counts.sum() != s0.N) throw std::invalid_argument("simulate: counts do not sum to N");
  const auto grid = ode::TimeGrid::cover(0.0, T, dt_out);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SamplePath path;
  path.event_hash = kFnvOffset;
  path.times.reserve(grid.steps + 1);
  path.counts.reserve(grid.steps + 1);
  int next_sample = 0;
  auto record_until = [&](double limit, const CountState& s, bool inclusive) {
    while (next_sample <= grid.steps) {
      const double ts = grid.at(next_sample);
      if (inclusive ? ts > limit : ts >= limit) break;
      path.times.push_back(ts);
      path.counts.push_back(s.counts);
      ++next_sample;
    }
  };

  CountState s = s0;
  double t = 0.0;
  while (t < T) {
    auto it = std::upper_bound(policy.change_times.begin(), policy.change_times.end(), t);
    const double next_break = it == policy.change_times.end() ? T : std::min(*it, T);
    const Control u = policy.control(0.5 * (t + next_break));

    const auto moves = enumerate_transitions(s, u, cfg);
    double total = 0.0;
    for (const auto& mv : moves) total += mv.rate;
    if (!std::isfinite(total)) throw NumericalError("simulate: total event rate overflowed");

    double t_event = std::numeric_limits<double>::infinity();
    if (total > 0.0) t_event = t + std::exponential_distribution<double>(total)(rng);
    if (t_event > next_break) {
      record_until(next_break, s, true);
      t = next_break;
      continue;
    }

    record_until(t_event, s, false);
    const double pick = unit(rng) * total;
    double acc = 0.0;
    std::size_t chosen = moves.size() - 1;
    for (std::size_t r = 0; r < moves.size(); ++r) {
      acc += moves[r].rate;
      if (pick < acc) {
        chosen = r;
        break;
      }
    }
    const auto& mv = moves[chosen];
    --s.counts(mv.from_i, mv.from_j);
    ++s.counts(mv.to_i, mv.to_j);
    if (path.events == 0) path.first_jump = t_event;
    ++path.events;
    fnv_mix(path.event_hash, std::bit_cast<std::uint64_t>(t_event));
    fnv_mix(path.event_hash, static_cast<std::uint64_t>(((mv.from_i * cfg.m + mv.from_j) * cfg.n + mv.to_i) * cfg.m + mv.to_j));
    t = t_event;
  }
  record_until(T, s, true);
  return path;
}

EnsembleResult run_ensemble(const Matrix& x0, std::int64_t N, const Policy& policy, double T, double dt_out,
                            int replications, std::uint64_t seed, const GameConfig& cfg,
                            const EnsembleOptions& options) {
  if (replications < 1) throw std::invalid_argument("run_ensemble: replications must be positive");
  const CountState s0 = CountState::from_density(x0, N);

  std::vector<SamplePath> paths(replications);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int r = next++; r < replications; r = next++) {
      try {
        paths[r] = simulate(s0, policy, T, dt_out, seed + static_cast<std::uint64_t>(r), cfg);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  int threads = options.threads > 0 ? options.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, replications);
  std::vector<std::thread> pool;
  for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  EnsembleResult out;
  out.N = N;
  out.replications = replications;
  out.seed = seed;
  out.times = paths.front().times;
  out.combined_hash = kFnvOffset;
  const std::size_t samples = out.times.size();
  const double scale = 1.0 / static_cast<double>(N);
  for (std::size_t k = 0; k < samples; ++k) {
    Matrix sum = Matrix::Zero(cfg.n, cfg.m);
    Matrix sq = Matrix::Zero(cfg.n, cfg.m);
    for (const auto& p : paths) {
      const Matrix x = p.counts[k].cast<double>() * scale;
      sum += x;
      sq += x.cwiseProduct(x);
    }
    const Matrix mean = sum / replications;
    Matrix se = Matrix::Zero(cfg.n, cfg.m);
    if (replications > 1) {
      const Matrix var = ((sq - replications * mean.cwiseProduct(mean)) / (replications - 1)).cwiseMax(0.0);
      se = (var / replications).cwiseSqrt();
    }
    out.mean.push_back(mean);
    out.std_error.push_back(se);
  }
  for (const auto& p : paths) {
    out.hashes.push_back(p.event_hash);
    fnv_mix(out.combined_hash, p.event_hash);
  }
  if (options.keep_paths) out.paths = std::move(paths);
  return out;
}

ConvergenceStudy convergence_study(const GameConfig& cfg, const Control& u, const Matrix& x0, double T,
                                   const std::vector<std::int64_t>& N_list, int replications,
                                   std::uint64_t seed, int checkpoints, const EnsembleOptions& options) {
  if (N_list.empty() || !std::is_sorted(N_list.begin(), N_list.end()) ||
      std::adjacent_find(N_list.begin(), N_list.end()) != N_list.end())
    throw std::invalid_argument("convergence_study: N_list must be strictly increasing");
  if (checkpoints < 1) throw std::invalid_argument("convergence_study: need at least one checkpoint");

  ConvergenceStudy study;
  const double dt_out = T / checkpoints;
  constexpr int kSubsteps = 50;
  const Policy policy = Policy::fixed(u);

  for (std::int64_t N : N_list) {
    const EnsembleResult ens = run_ensemble(x0, N, policy, T, dt_out, replications, seed, cfg, options);
    const Occupation start(CountState::from_density(x0, N).density());
    const auto ode = integrate_forward(start, constant_control(u), 0.0, T, dt_out / kSubsteps, cfg);

    ConvergenceRow row;
    row.N = N;
    double sq = 0.0;
    int count = 0;
    for (int c = 1; c <= checkpoints; ++c) {
      const Matrix diff = ens.mean[c] - ode.states[static_cast<std::size_t>(c) * kSubsteps];
      sq += diff.squaredNorm();
      count += static_cast<int>(diff.size());
      for (Eigen::Index k = 0; k < diff.size(); ++k) {
        const double se = ens.std_error[c].data()[k];
        if (se <= 0.0) continue;
        const double z = std::abs(diff.data()[k]) / se;
        row.max_z = std::max(row.max_z, z);
        ++row.z_tests;
        if (z > 3.0) ++row.z_exceed;
      }
    }
    row.rmse = std::sqrt(sq / count);
    study.rows.push_back(row);
  }
  for (int c = 1; c <= checkpoints; ++c) study.checkpoints.push_back(c * dt_out);

  if (study.rows.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (const auto& r : study.rows) {
      mx += std::log(static_cast<double>(r.N));
      my += std::log(r.rmse);
    }
    mx /= study.rows.size();
    my /= study.rows.size();
    double sxy = 0.0, sxx = 0.0;
    for (const auto& r : study.rows) {
      const double dx = std::log(static_cast<double>(r.N)) - mx;
      sxy += dx * (std::log(r.rmse) - my);
      sxx += dx * dx;
    }
    study.slope = sxy / sxx;
  }
  return study;
}

}  // namespace mfg
