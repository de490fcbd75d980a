#include "mel/wireless_link.hpp"

#include <cmath>
#include <stdexcept>

namespace mel::wireless {

void ChannelSpec::validate() const {
  if (!(bandwidth_hz > 0.0)) {
    throw std::invalid_argument("ChannelSpec: bandwidth_hz must be > 0");
  }
  if (!(distance_m > 0.0)) {
    throw std::invalid_argument("ChannelSpec: distance_m must be > 0");
  }
  if (gain_override && !(*gain_override > 0.0 && *gain_override <= 1.0)) {
    throw std::invalid_argument("ChannelSpec: gain_override must lie in (0, 1]");
  }
  if (!(dbm_to_watt(tx_power_dbm) > 0.0)) {
    throw std::invalid_argument("ChannelSpec: tx power must convert to > 0 W");
  }
}

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watt_to_dbm(double watt) {
  if (!(watt > 0.0)) {
    throw std::domain_error("watt_to_dbm: power must be > 0");
  }
  return 10.0 * std::log10(watt) + 30.0;
}

double pathloss_gain(double distance_m) {
  if (!(distance_m > 0.0)) {
    throw std::domain_error("pathloss_gain: distance must be > 0");
  }
  const double pl_db = 128.0 + 37.1 * std::log10(distance_m / 1000.0);
  return std::pow(10.0, -pl_db / 10.0);
}

double effective_gain(const ChannelSpec& spec) {
  return spec.gain_override ? *spec.gain_override : pathloss_gain(spec.distance_m);
}

double link_rate(const ChannelSpec& spec) {
  spec.validate();
  const double p_watt = dbm_to_watt(spec.tx_power_dbm);
  const double noise_watt = dbm_to_watt(spec.noise_psd_dbm_hz) * spec.bandwidth_hz;
  const double snr = p_watt * effective_gain(spec) / noise_watt;
  return spec.bandwidth_hz * std::log2(1.0 + snr);
}

}  // namespace mel::wireless
