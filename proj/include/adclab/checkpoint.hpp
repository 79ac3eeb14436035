#pragma once

// Text checkpoint:
//   ADCLAB-CKPT v1
//   method <name> seed <n>
//   <tensor name> shape <d0> <d1> ...
//   <row-major values, shortest round-trip decimals>
//   ... one header/values pair per tensor, in ModelParams::tensors() order.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "adclab/errors.hpp"
#include "adclab/format.hpp"
#include "adclab/nn.hpp"
#include "adclab/tabular.hpp"

namespace adclab {

inline constexpr std::string_view kCheckpointMagic = "ADCLAB-CKPT v1";

struct CheckpointInfo {
  MethodId method;
  std::uint64_t seed;
};

inline void write_checkpoint(std::ostream& os, nn::ModelParams& params, const CheckpointInfo& info) {
  os << kCheckpointMagic << '\n';
  os << "method " << to_string(info.method) << " seed " << info.seed << '\n';
  for (auto& nt : params.tensors()) {
    os << nt.name << " shape";
    for (auto d : nt.tensor->shape()) os << ' ' << d;
    os << '\n' << join_doubles(nt.tensor->data(), " ") << '\n';
  }
}

/// Reads values into `params`, whose tensors must already have the stored
/// shapes (build it with init_params from the run's dimensions).
inline CheckpointInfo read_checkpoint(std::istream& is, nn::ModelParams& params) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != kCheckpointMagic)
    throw CheckpointError("missing '" + std::string(kCheckpointMagic) + "' header");
  if (!std::getline(is, line)) throw CheckpointError("missing method/seed line");
  CheckpointInfo info{};
  {
    std::istringstream ls(line);
    std::string kw1, name, kw2, seed;
    ls >> kw1 >> name >> kw2 >> seed;
    if (kw1 != "method" || kw2 != "seed") throw CheckpointError("malformed method/seed line");
    try {
      info.method = parse_method(name);
      info.seed = parse_unsigned(seed);
    } catch (const Error& e) {
      throw CheckpointError(e.what());
    }
  }
  for (auto& nt : params.tensors()) {
    if (!std::getline(is, line)) throw CheckpointError("missing tensor " + nt.name);
    std::istringstream hs(line);
    std::string name, kw;
    hs >> name >> kw;
    if (name != nt.name || kw != "shape")
      throw CheckpointError("expected tensor " + nt.name + ", found '" + line + "'");
    ad::Shape shape;
    std::size_t d;
    while (hs >> d) shape.push_back(d);
    if (shape != nt.tensor->shape())
      throw CheckpointError(nt.name + ": stored shape " + ad::shape_string(shape) +
                            " differs from " + ad::shape_string(nt.tensor->shape()));
    if (!std::getline(is, line)) throw CheckpointError("missing values of " + nt.name);
    const auto parts = split(trim(line), ' ');
    auto data = nt.tensor->data();
    if (parts.size() != data.size() && !(data.empty() && parts.size() == 1))
      throw CheckpointError(nt.name + ": expected " + std::to_string(data.size()) +
                            " values, got " + std::to_string(parts.size()));
    try {
      for (std::size_t i = 0; i < data.size(); ++i) data[i] = parse_double(parts[i]);
    } catch (const ConfigError& e) {
      throw CheckpointError(nt.name + ": " + e.what());
    }
  }
  return info;
}

inline void save_checkpoint(const std::filesystem::path& path, nn::ModelParams& params,
                            const CheckpointInfo& info) {
  std::ofstream os(path);
  if (!os) throw CheckpointError("cannot write " + path.string());
  write_checkpoint(os, params, info);
}

inline CheckpointInfo load_checkpoint(const std::filesystem::path& path, nn::ModelParams& params) {
  std::ifstream is(path);
  if (!is) throw CheckpointError("cannot open " + path.string());
  return read_checkpoint(is, params);
}

}  // namespace adclab
