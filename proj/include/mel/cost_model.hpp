#pragma once

#include <cstddef>

#include "mel/wireless_link.hpp"

namespace mel::cost {

// OL: the orchestrator ships data batches together with the model.
// FL: learners keep private data, only the model crosses the link.
enum class OffloadMode { OL, FL };

// Bit- and cycle-accounting description of the model being trained.
// size_per_sample covers model state that scales with the allocated batch;
// it may be zero for batch-independent models.
struct ModelSpec {
  double features = 784.0;              // feature count per sample
  double data_precision_bits = 8.0;     // bits per feature value
  double model_precision_bits = 32.0;   // bits per parameter
  double size_fixed = 3e5;              // parameters independent of batch
  double size_per_sample = 1.0;         // parameters per allocated sample
  double complexity_cycles = 1e6;       // cycles per sample per local update

  void validate() const;
};

struct LearnerProfile {
  std::size_t id = 0;
  double cpu_hz = 2.4e9;
  wireless::ChannelSpec channel;
  ModelSpec model;

  void validate() const;
};

// Linearization of the per-cycle time: one global cycle with tau local
// updates costs c2*tau*d_k + c1*d_k + c0 seconds for learner k.
//   c2 — seconds per sample per local update (compute)
//   c1 — seconds per sample per cycle (data + batch-scaled model exchange)
//   c0 — seconds per cycle (fixed model exchange)
//   a = c1/c2, b = c0/c2
struct CostCoefficients {
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;
  double a = 0.0;
  double b = 0.0;
};

// Orchestrator -> learner transfer: batch bits (OL only) plus model bits.
double time_send(const LearnerProfile& p, double d_k, OffloadMode mode);

// One local update over d_k samples.
double time_compute(const LearnerProfile& p, double d_k);

// Learner -> orchestrator transfer of the updated model; mode-independent.
double time_receive(const LearnerProfile& p, double d_k);

// Total busy time for L local updates aggregated every tau: L*(tC + (tS+tR)/tau).
double total_time(const LearnerProfile& p, double d_k, double tau, double L,
                  OffloadMode mode);

CostCoefficients cost_coefficients(const LearnerProfile& p, OffloadMode mode);

// Same total as above, via the linearized coefficients.
double total_time(const CostCoefficients& c, double d_k, double tau, double L);

}  // namespace mel::cost
