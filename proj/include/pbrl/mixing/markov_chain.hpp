#pragma once

#include <Eigen/Core>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pbrl/core/error.hpp"

namespace pbrl::mixing {

/// Row-stochastic transition matrix of a finite Markov chain.
class MarkovChain {
 public:
  static constexpr double kRowTolerance = 1e-12;

  explicit MarkovChain(Eigen::MatrixXd transition) : P_(std::move(transition)) {
    if (P_.rows() == 0 || P_.rows() != P_.cols()) throw ValidationError("transition matrix must be square and nonempty");
    std::vector<Eigen::Index> bad;
    for (Eigen::Index i = 0; i < P_.rows(); ++i)
      if ((P_.row(i).array() < 0.0).any() || !P_.row(i).allFinite() || std::abs(P_.row(i).sum() - 1.0) > kRowTolerance)
        bad.push_back(i);
    if (!bad.empty()) {
      std::string msg = "matrix is not row-stochastic; offending rows:";
      for (auto i : bad) msg += " " + std::to_string(i);
      throw ValidationError(msg);
    }
  }

  /// [[1-p, p], [q, 1-q]].
  static MarkovChain two_state(double p, double q) {
    Eigen::MatrixXd m(2, 2);
    m << 1.0 - p, p, q, 1.0 - q;
    return MarkovChain(std::move(m));
  }

  std::size_t size() const { return std::size_t(P_.rows()); }
  const Eigen::MatrixXd& matrix() const { return P_; }

  /// Same chain with states relabelled: new state i is old state perm[i].
  MarkovChain permuted(const std::vector<std::size_t>& perm) const {
    const auto n = P_.rows();
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) m(i, j) = P_(Eigen::Index(perm[i]), Eigen::Index(perm[j]));
    return MarkovChain(std::move(m));
  }

 private:
  Eigen::MatrixXd P_;
};

/// Whitespace-separated rows, one per line; '#' starts a comment.
inline MarkovChain parse_chain(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (auto c = line.find('#'); c != std::string::npos) line.erase(c);
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &pos);
      } catch (const std::exception&) {
        throw ValidationError("not a number: '" + tok + "'");
      }
      if (pos != tok.size()) throw ValidationError("not a number: '" + tok + "'");
      row.push_back(v);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("matrix file is empty");
  const auto n = Eigen::Index(rows.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (Eigen::Index(rows[i].size()) != n) throw ValidationError("row " + std::to_string(i) + " does not have " + std::to_string(n) + " entries");
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  return MarkovChain(std::move(m));
}

inline MarkovChain load_chain(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open matrix file '" + path + "'");
  return parse_chain(is);
}

}  // namespace pbrl::mixing
