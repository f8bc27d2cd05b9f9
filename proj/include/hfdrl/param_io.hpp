#pragma once

// Binary ParamSet stream, all fields little-endian:
//   u64 layer_count
//   layer_count x (u64 in_dim, u64 out_dim)
//   per layer: weights row-major as f64, then biases as f64
// Hidden layers are tanh, the last layer is linear.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hfdrl/errors.hpp"
#include "hfdrl/nn_core.hpp"

namespace hfdrl {

inline std::size_t serialized_size_bytes(const std::vector<LayerShape>& shapes) {
  std::size_t n = 8 + 16 * shapes.size();
  for (const auto& s : shapes) n += 8 * (s.in_dim * s.out_dim + s.out_dim);
  return n;
}

namespace detail {
inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_u64(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw ParseError("truncated parameter stream at byte " + std::to_string(pos));
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  pos += 8;
  return v;
}
}  // namespace detail

inline std::vector<std::uint8_t> serialize(const ParamSet& params) {
  std::vector<std::uint8_t> out;
  out.reserve(serialized_size_bytes(params.shapes()));
  detail::put_u64(out, params.layers.size());
  for (const auto& s : params.shapes()) {
    detail::put_u64(out, s.in_dim);
    detail::put_u64(out, s.out_dim);
  }
  for (const auto& l : params.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
        detail::put_u64(out, std::bit_cast<std::uint64_t>(l.weights(r, c)));
    for (Eigen::Index r = 0; r < l.biases.size(); ++r) detail::put_u64(out, std::bit_cast<std::uint64_t>(l.biases[r]));
  }
  return out;
}

inline ParamSet deserialize(const std::vector<std::uint8_t>& in) {
  std::size_t pos = 0;
  const std::uint64_t n_layers = detail::get_u64(in, pos);
  if (n_layers == 0 || n_layers > (in.size() / 16)) throw ParseError("implausible layer count " + std::to_string(n_layers));
  std::vector<LayerShape> shapes(n_layers);
  for (auto& s : shapes) {
    s.in_dim = detail::get_u64(in, pos);
    s.out_dim = detail::get_u64(in, pos);
  }
  check_chain(shapes);
  if (serialized_size_bytes(shapes) != in.size())
    throw ParseError("stream is " + std::to_string(in.size()) + " bytes, header implies " +
                     std::to_string(serialized_size_bytes(shapes)));
  ParamSet p;
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    DenseLayer l;
    l.weights.resize(static_cast<Eigen::Index>(shapes[k].out_dim), static_cast<Eigen::Index>(shapes[k].in_dim));
    l.biases.resize(static_cast<Eigen::Index>(shapes[k].out_dim));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = std::bit_cast<double>(detail::get_u64(in, pos));
    for (Eigen::Index r = 0; r < l.biases.size(); ++r) l.biases[r] = std::bit_cast<double>(detail::get_u64(in, pos));
    l.activation = k + 1 == shapes.size() ? Activation::Identity : Activation::Tanh;
    p.layers.push_back(std::move(l));
  }
  return p;
}

}  // namespace hfdrl
