#include "skiptag/crf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace skiptag {

using namespace ad;

CrfParams CrfParams::init(int input_dim, int num_tags, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (input_dim + num_tags));
  std::uniform_real_distribution<double> d(-limit, limit);
  Matrix w(input_dim, num_tags);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = d(rng);
  return {Value::parameter(std::move(w)), Value::parameter(Matrix::Zero(1, num_tags)),
          Value::parameter(Matrix::Zero(num_tags, num_tags)),
          Value::parameter(Matrix::Zero(1, num_tags)), Value::parameter(Matrix::Zero(1, num_tags))};
}

Value project_emissions(const Value& remained_states, const CrfParams& params) {
  if (remained_states.rows() == 0) throw std::invalid_argument("project_emissions: empty sequence");
  return matmul(remained_states, params.proj_weight) + params.proj_bias;
}

namespace {

void check(const CompressedSequence& seq, const CrfParams& params) {
  if (seq.emissions.rows() == 0) throw std::invalid_argument("crf: empty sequence");
  if (seq.emissions.cols() != params.num_tags())
    throw ShapeError("crf: emissions have " + std::to_string(seq.emissions.cols()) +
                     " columns for " + std::to_string(params.num_tags()) + " tags");
}

}  // namespace

Value log_partition(const CompressedSequence& seq, const CrfParams& params) {
  check(seq, params);
  Value alpha = params.start + row_of(seq.emissions, 0);
  for (Eigen::Index t = 1; t < seq.emissions.rows(); ++t) {
    // scores[i, j] = alpha_i + transitions[i, j]
    alpha = log_sum_exp_cols(transpose(alpha) + params.transitions) + row_of(seq.emissions, t);
  }
  return log_sum_exp(alpha + params.stop);
}

Value path_score(const CompressedSequence& seq, const CrfParams& params,
                 const std::vector<int>& tags) {
  check(seq, params);
  if (static_cast<Eigen::Index>(tags.size()) != seq.emissions.rows())
    throw std::invalid_argument("path_score: tag path length differs from the sequence");
  std::vector<Value> terms;
  terms.reserve(3 * tags.size() + 1);
  terms.push_back(pick(params.start, 0, tags.front()));
  for (std::size_t t = 0; t < tags.size(); ++t) {
    terms.push_back(pick(seq.emissions, static_cast<Eigen::Index>(t), tags[t]));
    if (t > 0) terms.push_back(pick(params.transitions, tags[t - 1], tags[t]));
  }
  terms.push_back(pick(params.stop, 0, tags.back()));
  return sum(concat_cols(terms));
}

Value nll(const CompressedSequence& seq, const CrfParams& params) {
  if (seq.gold.empty()) throw std::invalid_argument("nll: sequence has no gold tags");
  return log_partition(seq, params) - path_score(seq, params, seq.gold);
}

TransitionMask TransitionMask::bioul(const TagSet& tags) {
  const int k = tags.size();
  TransitionMask m;
  m.allowed.assign(static_cast<std::size_t>(k + 1), std::vector<bool>(static_cast<std::size_t>(k + 1)));
  for (int from = -1; from < k; ++from)
    for (int to = -1; to < k; ++to)
      m.allowed[static_cast<std::size_t>(from + 1)][static_cast<std::size_t>(to + 1)] =
          !(from < 0 && to < 0) && tags.allowed(from, to);
  return m;
}

ViterbiResult viterbi(const CompressedSequence& seq, const CrfParams& params,
                      const TransitionMask* mask) {
  check(seq, params);
  const Matrix& e = seq.emissions.data();
  const Matrix& trans = params.transitions.data();
  const Eigen::Index n = e.rows();
  const Eigen::Index k = e.cols();
  constexpr double kNeg = -std::numeric_limits<double>::infinity();
  auto ok = [&](Eigen::Index from, Eigen::Index to) {
    return !mask || mask->allowed[static_cast<std::size_t>(from + 1)][static_cast<std::size_t>(to + 1)];
  };

  Matrix score(n, k);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> back(n, k);
  for (Eigen::Index j = 0; j < k; ++j)
    score(0, j) = ok(-1, j) ? params.start.data()(0, j) + e(0, j) : kNeg;
  for (Eigen::Index t = 1; t < n; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) {
      double best = kNeg;
      int arg = 0;
      for (Eigen::Index i = 0; i < k; ++i) {
        if (!ok(i, j)) continue;
        const double s = score(t - 1, i) + trans(i, j);
        if (s > best) {
          best = s;
          arg = static_cast<int>(i);
        }
      }
      score(t, j) = best + e(t, j);
      back(t, j) = arg;
    }
  }
  double best = kNeg;
  int last = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!ok(j, -1)) continue;
    const double s = score(n - 1, j) + params.stop.data()(0, j);
    if (s > best) {
      best = s;
      last = static_cast<int>(j);
    }
  }
  ViterbiResult r;
  r.score = best;
  r.tags.resize(static_cast<std::size_t>(n));
  r.tags.back() = last;
  for (Eigen::Index t = n - 1; t > 0; --t)
    r.tags[static_cast<std::size_t>(t - 1)] = back(t, r.tags[static_cast<std::size_t>(t)]);
  return r;
}

}  // namespace skiptag
