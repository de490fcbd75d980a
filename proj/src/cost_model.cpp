#include "mel/cost_model.hpp"

#include <stdexcept>

namespace mel::cost {

void ModelSpec::validate() const {
  if (!(features > 0.0) || !(data_precision_bits > 0.0) ||
      !(model_precision_bits > 0.0) || !(size_fixed > 0.0)) {
    throw std::invalid_argument("ModelSpec: sizes and precisions must be > 0");
  }
  if (!(size_per_sample >= 0.0)) {
    throw std::invalid_argument("ModelSpec: size_per_sample must be >= 0");
  }
  if (!(complexity_cycles >= 1.0)) {
    throw std::invalid_argument("ModelSpec: complexity_cycles must be >= 1");
  }
}

void LearnerProfile::validate() const {
  if (!(cpu_hz > 0.0)) {
    throw std::invalid_argument("LearnerProfile: cpu_hz must be > 0");
  }
  channel.validate();
  model.validate();
}

namespace {

double model_bits(const ModelSpec& m, double d_k) {
  return m.model_precision_bits * (d_k * m.size_per_sample + m.size_fixed);
}

}  // namespace

double time_send(const LearnerProfile& p, double d_k, OffloadMode mode) {
  if (!(d_k >= 0.0)) {
    throw std::domain_error("time_send: d_k must be >= 0");
  }
  const double rate = wireless::link_rate(p.channel);
  double bits = model_bits(p.model, d_k);
  if (mode == OffloadMode::OL) {
    bits += d_k * p.model.features * p.model.data_precision_bits;
  }
  return bits / rate;
}

double time_compute(const LearnerProfile& p, double d_k) {
  if (!(d_k >= 0.0)) {
    throw std::domain_error("time_compute: d_k must be >= 0");
  }
  return d_k * p.model.complexity_cycles / p.cpu_hz;
}

double time_receive(const LearnerProfile& p, double d_k) {
  if (!(d_k >= 0.0)) {
    throw std::domain_error("time_receive: d_k must be >= 0");
  }
  return model_bits(p.model, d_k) / wireless::link_rate(p.channel);
}

double total_time(const LearnerProfile& p, double d_k, double tau, double L,
                  OffloadMode mode) {
  if (!(tau > 0.0)) {
    throw std::domain_error("total_time: tau must be > 0");
  }
  return L * (time_compute(p, d_k) +
              (time_send(p, d_k, mode) + time_receive(p, d_k)) / tau);
}

CostCoefficients cost_coefficients(const LearnerProfile& p, OffloadMode mode) {
  p.validate();
  const ModelSpec& m = p.model;
  const double rate = wireless::link_rate(p.channel);
  CostCoefficients c;
  c.c2 = m.complexity_cycles / p.cpu_hz;
  double per_sample_bits = 2.0 * m.model_precision_bits * m.size_per_sample;
  if (mode == OffloadMode::OL) {
    per_sample_bits += m.features * m.data_precision_bits;
  }
  c.c1 = per_sample_bits / rate;
  c.c0 = 2.0 * m.model_precision_bits * m.size_fixed / rate;
  c.a = c.c1 / c.c2;
  c.b = c.c0 / c.c2;
  return c;
}

double total_time(const CostCoefficients& c, double d_k, double tau, double L) {
  if (!(tau > 0.0)) {
    throw std::domain_error("total_time: tau must be > 0");
  }
  return L * (c.c2 * d_k + (c.c1 * d_k + c.c0) / tau);
}

}  // namespace mel::cost
