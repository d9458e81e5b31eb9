#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "pbrl/autodiff/tensor.hpp"
#include "pbrl/core/csv.hpp"
#include "pbrl/core/error.hpp"

namespace pbrl::sac {

/// Text format, version 1:
///   pbrl-params v1
///   name <label>
///   blocks <k>
///   <rows> <cols> <values...>      one line per block
inline void save_params(const std::string& path, const std::string& name, const std::vector<ad::Tensor>& params) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot open '" + path + "' for writing");
  os << "pbrl-params v1\nname " << name << "\nblocks " << params.size() << '\n';
  for (const auto& t : params) {
    os << t.rows() << ' ' << t.cols();
    for (double v : t.data()) os << ' ' << format_double(v);
    os << '\n';
  }
}

struct ParamCheckpoint {
  std::string name;
  std::vector<ad::Tensor> params;
};

inline ParamCheckpoint load_params(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open checkpoint '" + path + "'");
  std::string magic, version, key;
  is >> magic >> version;
  if (magic != "pbrl-params" || version != "v1") throw ValidationError("unsupported parameter file '" + path + "'");
  ParamCheckpoint ck;
  std::size_t blocks = 0;
  is >> key >> ck.name >> key >> blocks;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::size_t r = 0, c = 0;
    is >> r >> c;
    std::vector<double> v(r * c);
    for (auto& x : v) {
      std::string tok;
      is >> tok;
      x = std::stod(tok);
    }
    ck.params.emplace_back(r, c, std::move(v));
  }
  if (!is) throw ValidationError("truncated parameter file '" + path + "'");
  return ck;
}

}  // namespace pbrl::sac
