#include "mel/learner_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstring>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mel::learner {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  // log(1 + exp(z)) without overflow
  return z > 30.0 ? z : std::log1p(std::exp(z));
}

void check_prefix(const Dataset& data, std::size_t n,
                  const std::vector<double>& w) {
  if (n > data.size()) {
    throw std::invalid_argument("dataset prefix exceeds available samples");
  }
  if (w.size() != data.dim) {
    throw std::invalid_argument("model dimension does not match dataset");
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double dataset_loss(TaskKind kind, const Dataset& data, std::size_t n,
                    const std::vector<double>& w) {
  check_prefix(data, n, w);
  if (n == 0) return 0.0;
  double loss = 0.0;
  if (kind == TaskKind::kQuadratic) {
    for (std::size_t i = 0; i < n; ++i) {
      const double r = dot(data.row(i), w.data(), data.dim) - data.y[i];
      loss += 0.5 * r * r;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dot(data.row(i), w.data(), data.dim);
      loss += softplus(z) - data.y[i] * z;
    }
  }
  return loss / static_cast<double>(n);
}

std::vector<double> dataset_gradient(TaskKind kind, const Dataset& data,
                                     std::size_t n,
                                     const std::vector<double>& w) {
  check_prefix(data, n, w);
  std::vector<double> g(data.dim, 0.0);
  if (n == 0) return g;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = data.row(i);
    const double z = dot(xi, w.data(), data.dim);
    const double coef = kind == TaskKind::kQuadratic ? (z - data.y[i])
                                                     : (sigmoid(z) - data.y[i]);
    for (std::size_t j = 0; j < data.dim; ++j) g[j] += coef * xi[j];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < data.dim; ++j) {
    g[j] *= inv_n;
    if (!std::isfinite(g[j])) {
      throw std::runtime_error("dataset_gradient: non-finite gradient at coordinate " +
                               std::to_string(j));
    }
  }
  return g;
}

std::vector<double> local_update(TaskKind kind, const Dataset& data,
                                 std::size_t n, const std::vector<double>& w,
                                 double eta) {
  const std::vector<double> g = dataset_gradient(kind, data, n, w);
  std::vector<double> next(w);
  for (std::size_t j = 0; j < next.size(); ++j) next[j] -= eta * g[j];
  return next;
}

double global_loss(TaskKind kind, const std::vector<Dataset>& datasets,
                   const std::vector<std::int64_t>& d_k,
                   const std::vector<double>& w) {
  if (datasets.size() != d_k.size()) {
    throw std::invalid_argument("global_loss: datasets/d_k size mismatch");
  }
  double total = 0.0;
  double weight = 0.0;
  for (std::size_t k = 0; k < datasets.size(); ++k) {
    if (d_k[k] <= 0) continue;
    total += static_cast<double>(d_k[k]) *
             dataset_loss(kind, datasets[k], static_cast<std::size_t>(d_k[k]), w);
    weight += static_cast<double>(d_k[k]);
  }
  if (weight == 0.0) {
    throw std::invalid_argument("global_loss: no samples allocated");
  }
  return total / weight;
}

std::vector<double> global_gradient(TaskKind kind,
                                    const std::vector<Dataset>& datasets,
                                    const std::vector<std::int64_t>& d_k,
                                    const std::vector<double>& w) {
  if (datasets.size() != d_k.size()) {
    throw std::invalid_argument("global_gradient: datasets/d_k size mismatch");
  }
  std::vector<double> g(w.size(), 0.0);
  double weight = 0.0;
  for (std::size_t k = 0; k < datasets.size(); ++k) {
    if (d_k[k] <= 0) continue;
    const auto gk =
        dataset_gradient(kind, datasets[k], static_cast<std::size_t>(d_k[k]), w);
    for (std::size_t j = 0; j < g.size(); ++j) {
      g[j] += static_cast<double>(d_k[k]) * gk[j];
    }
    weight += static_cast<double>(d_k[k]);
  }
  if (weight == 0.0) {
    throw std::invalid_argument("global_gradient: no samples allocated");
  }
  for (double& v : g) v /= weight;
  return g;
}

void auxiliary_step(TaskKind kind, const std::vector<Dataset>& datasets,
                    const std::vector<std::int64_t>& d_k, AuxiliaryTrack& track,
                    double eta) {
  const auto g = global_gradient(kind, datasets, d_k, track.v);
  for (std::size_t j = 0; j < track.v.size(); ++j) track.v[j] -= eta * g[j];
}

std::string GradientCheckReport::to_string() const {
  std::ostringstream os;
  os << (pass ? "pass" : "FAIL") << " max_rel_error=" << max_rel_error
     << " worst_coordinate=" << worst_coordinate << " step=" << step;
  return os.str();
}

GradientCheckReport gradient_check(TaskKind kind, const Dataset& data,
                                   std::size_t n, const std::vector<double>& w,
                                   double step, double tol) {
  GradientCheckReport rep;
  rep.step = step;
  const auto g = dataset_gradient(kind, data, n, w);
  double scale = 1.0;
  for (const double v : g) scale = std::max(scale, std::abs(v));
  std::vector<double> probe(w);
  for (std::size_t j = 0; j < w.size(); ++j) {
    probe[j] = w[j] + step;
    const double f_plus = dataset_loss(kind, data, n, probe);
    probe[j] = w[j] - step;
    const double f_minus = dataset_loss(kind, data, n, probe);
    probe[j] = w[j];
    const double fd = (f_plus - f_minus) / (2.0 * step);
    const double rel = std::abs(fd - g[j]) / scale;
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_coordinate = j;
    }
  }
  rep.pass = rep.max_rel_error < tol;
  return rep;
}

double quadratic_smoothness(const Dataset& data, std::size_t n) {
  if (n == 0 || data.dim == 0) return 0.0;
  if (n > data.size()) {
    throw std::invalid_argument("quadratic_smoothness: prefix exceeds samples");
  }
  // Power iteration on H = X'X/n.
  std::vector<double> v(data.dim, 1.0 / std::sqrt(static_cast<double>(data.dim)));
  std::vector<double> hv(data.dim, 0.0);
  double lambda = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    std::fill(hv.begin(), hv.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = data.row(i);
      const double s = dot(xi, v.data(), data.dim);
      for (std::size_t j = 0; j < data.dim; ++j) hv[j] += s * xi[j];
    }
    for (double& h : hv) h /= static_cast<double>(n);
    const double norm = std::sqrt(dot(hv.data(), hv.data(), data.dim));
    if (norm == 0.0) return 0.0;
    const double next = norm;
    for (std::size_t j = 0; j < data.dim; ++j) v[j] = hv[j] / norm;
    if (std::abs(next - lambda) <= 1e-12 * std::max(1.0, next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

SyntheticTask::SyntheticTask(const TaskSpec& spec)
    : kind_(spec.kind), dim_(spec.dim), spec_(spec), generated_(true) {
  if (spec.dim == 0 || spec.learners == 0) {
    throw std::invalid_argument("SyntheticTask: dim and learners must be > 0");
  }
  std::mt19937_64 master(splitmix64(spec.seed));
  std::normal_distribution<double> normal;
  w_true_.resize(dim_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  for (auto& v : w_true_) v = normal(master) * scale;

  pools_.resize(spec.learners);
  for (std::size_t k = 0; k < spec.learners; ++k) {
    Stream& s = pools_[k];
    s.rng.seed(splitmix64(spec.seed ^ (0x10000ULL + k)));
    s.mean.assign(dim_, 0.0);
    if (spec.heterogeneity > 0.0) {
      double norm = 0.0;
      for (auto& m : s.mean) {
        m = s.normal(s.rng);
        norm += m * m;
      }
      norm = std::sqrt(norm);
      if (norm > 0.0) {
        for (auto& m : s.mean) m *= spec.heterogeneity / norm;
      }
    }
    s.data.dim = dim_;
  }

  // Held-out evaluation split: equal draws from every learner distribution,
  // so policies with different batch allocations stay comparable.
  std::mt19937_64 eval_rng(splitmix64(spec.seed ^ 0xEA51ULL));
  std::normal_distribution<double> eval_normal;
  std::uniform_real_distribution<double> eval_uniform(0.0, 1.0);
  eval_.dim = dim_;
  eval_.x.reserve(spec.eval_samples * dim_);
  eval_.y.reserve(spec.eval_samples);
  for (std::size_t i = 0; i < spec.eval_samples; ++i) {
    const auto& mean = pools_[i % spec.learners].mean;
    double z = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      const double xj = mean[j] + eval_normal(eval_rng);
      eval_.x.push_back(xj);
      z += xj * w_true_[j];
    }
    if (kind_ == TaskKind::kQuadratic) {
      eval_.y.push_back(z + spec.noise * eval_normal(eval_rng));
    } else {
      eval_.y.push_back(eval_uniform(eval_rng) < sigmoid(z) ? 1.0 : 0.0);
    }
  }
}

SyntheticTask::SyntheticTask(TaskKind kind, std::vector<Dataset> datasets)
    : kind_(kind), generated_(false) {
  if (datasets.empty()) {
    throw std::invalid_argument("SyntheticTask: need at least one dataset");
  }
  dim_ = datasets.front().dim;
  pools_.resize(datasets.size());
  for (std::size_t k = 0; k < datasets.size(); ++k) {
    if (datasets[k].dim != dim_) {
      throw std::invalid_argument("SyntheticTask: inconsistent feature dimension");
    }
    pools_[k].data = std::move(datasets[k]);
    pools_[k].mean.assign(dim_, 0.0);
    pools_[k].data.dim = dim_;
  }
  eval_.dim = dim_;
}

void SyntheticTask::generate(Stream& s, std::size_t upto) {
  if (!generated_) {
    if (upto > s.data.size()) {
      throw std::invalid_argument(
          "SyntheticTask: explicit dataset smaller than requested batch");
    }
    return;
  }
  while (s.data.size() < upto) {
    double z = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      const double xj = s.mean[j] + s.normal(s.rng);
      s.data.x.push_back(xj);
      z += xj * w_true_[j];
    }
    if (kind_ == TaskKind::kQuadratic) {
      s.data.y.push_back(z + spec_.noise * s.normal(s.rng));
    } else {
      s.data.y.push_back(s.uniform(s.rng) < sigmoid(z) ? 1.0 : 0.0);
    }
  }
}

const Dataset& SyntheticTask::pool(std::size_t k, std::int64_t n) {
  if (k >= pools_.size()) throw std::out_of_range("SyntheticTask: learner index");
  if (n < 0) throw std::invalid_argument("SyntheticTask: negative batch");
  Stream& s = pools_[k];
  generate(s, s.window_start + static_cast<std::size_t>(n));
  return s.data;
}

std::size_t SyntheticTask::window_start(std::size_t k) const {
  return pools_.at(k).window_start;
}

const std::vector<double>& SyntheticTask::learner_mean(std::size_t k) const {
  return pools_.at(k).mean;
}

Dataset SyntheticTask::window(std::size_t k, std::int64_t d_k) {
  const Dataset& full = pool(k, d_k);
  Stream& s = pools_[k];
  if (s.window_start == 0) return {};  // caller uses the pool prefix directly
  Dataset out;
  out.dim = dim_;
  const std::size_t n = static_cast<std::size_t>(d_k);
  out.x.assign(full.x.begin() + s.window_start * dim_,
               full.x.begin() + (s.window_start + n) * dim_);
  out.y.assign(full.y.begin() + s.window_start,
               full.y.begin() + s.window_start + n);
  return out;
}

SyntheticTask::LocalResult SyntheticTask::local_train(
    std::size_t k, const std::vector<double>& w, std::int64_t d_k,
    std::int64_t tau, double eta) {
  if (tau < 1) throw std::domain_error("local_train: tau must be >= 1");
  const std::size_t n = static_cast<std::size_t>(d_k);
  const Dataset moved = window(k, d_k);
  const Dataset& data = pools_[k].window_start == 0 ? pool(k, d_k) : moved;

  LocalResult r;
  r.w = w;
  r.grad_start = dataset_gradient(kind_, data, n, r.w);
  std::vector<double> g = r.grad_start;
  for (std::int64_t step = 0; step < tau; ++step) {
    if (step > 0) g = dataset_gradient(kind_, data, n, r.w);
    for (std::size_t j = 0; j < r.w.size(); ++j) r.w[j] -= eta * g[j];
  }
  r.grad_end = dataset_gradient(kind_, data, n, r.w);

  if (spec_.reshuffle_each_cycle && generated_) {
    pools_[k].window_start += n;
  }
  return r;
}

std::vector<double> SyntheticTask::local_gradient(std::size_t k,
                                                  const std::vector<double>& w,
                                                  std::int64_t d_k) {
  const std::size_t n = static_cast<std::size_t>(d_k);
  if (pools_[k].window_start == 0) {
    return dataset_gradient(kind_, pool(k, d_k), n, w);
  }
  return dataset_gradient(kind_, window(k, d_k), n, w);
}

double SyntheticTask::local_loss(std::size_t k, const std::vector<double>& w,
                                 std::int64_t d_k) {
  const std::size_t n = static_cast<std::size_t>(d_k);
  if (pools_[k].window_start == 0) {
    return dataset_loss(kind_, pool(k, d_k), n, w);
  }
  return dataset_loss(kind_, window(k, d_k), n, w);
}

double SyntheticTask::eval_loss(const std::vector<double>& w) {
  if (eval_.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  return dataset_loss(kind_, eval_, eval_.size(), w);
}

double SyntheticTask::eval_accuracy(const std::vector<double>& w) {
  if (kind_ != TaskKind::kLogistic || eval_.size() == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < eval_.size(); ++i) {
    const double z = dot(eval_.row(i), w.data(), eval_.dim);
    const double predicted = z >= 0.0 ? 1.0 : 0.0;
    if (predicted == eval_.y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(eval_.size());
}

}  // namespace mel::learner
