#include "butterfly/channel_json.hpp"

#include "butterfly/errors.hpp"

namespace butterfly {

namespace {

nlohmann::json coefficient_to_json(const Eigen::VectorXcd& h, bool as_list) {
  if (!as_list) return complex_to_json(h[0]);
  nlohmann::json list = nlohmann::json::array();
  for (Eigen::Index i = 0; i < h.size(); ++i) list.push_back(complex_to_json(h[i]));
  return list;
}

Eigen::VectorXcd coefficient_from_json(const nlohmann::json& j, int n, bool as_list,
                                       const std::string& key) {
  if (!as_list) return Eigen::VectorXcd::Constant(1, complex_from_json(j));
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw ShapeError("coefficient " + key + " must list " + std::to_string(n) + " entries");
  }
  Eigen::VectorXcd h(n);
  for (int i = 0; i < n; ++i) h[i] = complex_from_json(j[static_cast<std::size_t>(i)]);
  return h;
}

}  // namespace

nlohmann::json complex_to_json(Complex z) { return nlohmann::json::array({z.real(), z.imag()}); }

Complex complex_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError("complex value must be [re, im], got " + j.dump());
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

nlohmann::json channels_to_json(const ChannelRealization& ch) {
  const Topology& topo = ch.topology();
  const bool vector_center = !topo.is_single_antenna();
  nlohmann::json coeffs = nlohmann::json::object();
  for (const auto& [s, r] : topo.uplinks()) {
    coeffs[to_string(s) + "->" + to_string(r)] =
        coefficient_to_json(ch.uplink(s, r), vector_center && r == Relay::R2);
  }
  for (const auto& [r, d] : topo.downlinks()) {
    coeffs[to_string(r) + "->" + to_string(d)] =
        coefficient_to_json(ch.downlink(r, d), vector_center && r == Relay::R2);
  }
  return {{"variant", topo.name()},
          {"seed", ch.seed()},
          {"h_min", ch.h_min()},
          {"h_max", ch.h_max()},
          {"coefficients", std::move(coeffs)}};
}

ChannelRealization channels_from_json(const nlohmann::json& j) {
  try {
    const Topology topo = Topology::parse(j.at("variant").get<std::string>());
    const bool vector_center = !topo.is_single_antenna();
    const auto& coeffs = j.at("coefficients");
    ChannelBuilder builder(topo, j.at("h_min").get<double>(), j.at("h_max").get<double>());
    builder.seed(j.at("seed").get<std::uint64_t>());
    std::size_t expected = 0;
    for (const auto& [s, r] : topo.uplinks()) {
      const std::string key = to_string(s) + "->" + to_string(r);
      builder.uplink(s, r, coefficient_from_json(coeffs.at(key), topo.antennas(r),
                                                 vector_center && r == Relay::R2, key));
      ++expected;
    }
    for (const auto& [r, d] : topo.downlinks()) {
      const std::string key = to_string(r) + "->" + to_string(d);
      builder.downlink(r, d, coefficient_from_json(coeffs.at(key), topo.antennas(r),
                                                   vector_center && r == Relay::R2, key));
      ++expected;
    }
    if (coeffs.size() != expected) throw ShapeError("channel file lists links absent from " + topo.name());
    return builder.build();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed channel file: ") + e.what());
  }
}

}  // namespace butterfly
