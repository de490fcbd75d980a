#pragma once

#include <optional>

namespace mel::wireless {

// Static description of one orchestrator<->learner channel. Uplink and
// downlink share the same parameters (symmetric transmit power within one
// global cycle), so a single spec serves both directions.
struct ChannelSpec {
  double bandwidth_hz = 5e6;
  double tx_power_dbm = 23.0;
  double noise_psd_dbm_hz = -174.0;
  double distance_m = 500.0;
  // Linear power gain in (0, 1]. When set it overrides the distance-derived
  // path-loss gain.
  std::optional<double> gain_override;

  void validate() const;  // throws std::invalid_argument
};

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);

// Cellular attenuation model 128 + 37.1*log10(R_km) dB, returned as a linear
// power gain. Distance is taken in kilometers inside the log; with meters the
// gain would be ~ -228 dB and every link rate would vanish.
double pathloss_gain(double distance_m);

// Gain actually used for a spec: the override when present, otherwise the
// path-loss model at the spec's distance.
double effective_gain(const ChannelSpec& spec);

// Shannon rate W*log2(1 + P*h / (N0*W)) in bit/s. The noise term is the PSD
// integrated over the band so the SNR is dimensionless.
double link_rate(const ChannelSpec& spec);

}  // namespace mel::wireless
