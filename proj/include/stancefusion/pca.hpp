#pragma once

#include <cmath>
#include <iostream>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "stancefusion/error.hpp"
#include "stancefusion/tfidf.hpp"

namespace stancefusion {

/// Principal-component reduction fitted on centered data. Component rows
/// are orthonormal and ordered by non-increasing explained variance
/// (covariance eigenvalues with the 1/(n-1) convention). When k exceeds the
/// numerical rank the trailing rows are zero and rank_deficient is set.
struct PcaModel {
  Eigen::VectorXd mean;                 // length |V|
  Eigen::MatrixXd components;           // k x |V|
  Eigen::VectorXd explained_variance;   // length k
  bool rank_deficient = false;

  int input_dim() const { return static_cast<int>(mean.size()); }
  int output_dim() const { return static_cast<int>(components.rows()); }
};

struct PcaResult {
  PcaModel model;
  Eigen::MatrixXd transformed;  // n x k
};

inline Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.mean.size()) {
    throw DimensionMismatch("pca_project: expected length " + std::to_string(model.mean.size()) +
                            ", got " + std::to_string(x.size()));
  }
  return model.components * (x - model.mean);
}

inline Eigen::VectorXd pca_project(const PcaModel& model, const SparseVec& x) {
  return pca_project(model, x.dense());
}

namespace detail {

// Deterministic sign convention: the entry of largest magnitude in each
// component is positive.
inline void fix_component_signs(Eigen::MatrixXd& components) {
  for (Eigen::Index r = 0; r < components.rows(); ++r) {
    Eigen::Index argmax = 0;
    components.row(r).cwiseAbs().maxCoeff(&argmax);
    if (components(r, argmax) < 0.0) components.row(r) = -components.row(r);
  }
}

}  // namespace detail

/// Fits a k-component PCA on the rows of `vectors` (n x |V|, n >= k >= 1)
/// and returns the model together with the projected rows.
inline PcaResult reduce_pca(const Eigen::MatrixXd& vectors, int k) {
  const Eigen::Index n = vectors.rows();
  const Eigen::Index dim = vectors.cols();
  if (k < 1 || n < k) {
    throw DimensionMismatch("reduce_pca: need n >= k >= 1, got n=" + std::to_string(n) +
                            " k=" + std::to_string(k));
  }

  PcaModel model;
  model.mean = vectors.colwise().mean();
  Eigen::MatrixXd centered = vectors.rowwise() - model.mean.transpose();
  const double scale = n > 1 ? 1.0 / static_cast<double>(n - 1) : 1.0;

  Eigen::VectorXd eigenvalues;   // ascending, per SelfAdjointEigenSolver
  Eigen::MatrixXd eigenvectors;  // columns match eigenvalues
  if (dim <= n) {
    Eigen::MatrixXd cov = scale * (centered.transpose() * centered);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    eigenvalues = solver.eigenvalues();
    eigenvectors = solver.eigenvectors();
  } else {
    // Gram trick for wide data: eigenvectors of (1/(n-1)) X Xᵀ map onto
    // covariance eigenvectors via Xᵀ u / ||Xᵀ u||, with identical
    // nonzero eigenvalues.
    Eigen::MatrixXd gram = scale * (centered * centered.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    eigenvalues = solver.eigenvalues();
    Eigen::MatrixXd mapped(dim, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd v = centered.transpose() * solver.eigenvectors().col(i);
      const double norm = v.norm();
      if (norm > 0.0) v /= norm;
      mapped.col(i) = v;
    }
    eigenvectors = mapped;
  }

  const Eigen::Index available = eigenvalues.size();
  const double max_ev = available > 0 ? std::max(eigenvalues.maxCoeff(), 0.0) : 0.0;
  const double rank_tol = max_ev * static_cast<double>(std::max(n, dim)) * 1e-14;

  model.components = Eigen::MatrixXd::Zero(k, dim);
  model.explained_variance = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < k; ++i) {
    const Eigen::Index src = available - 1 - i;  // descending eigenvalue order
    if (src < 0 || eigenvalues[src] <= rank_tol) {
      model.rank_deficient = true;
      continue;
    }
    model.components.row(i) = eigenvectors.col(src).transpose();
    model.explained_variance[i] = eigenvalues[src];
  }
  if (model.rank_deficient) {
    std::cerr << "warning: PCA k=" << k
              << " exceeds the numerical rank of the data; trailing components are zero\n";
  }
  detail::fix_component_signs(model.components);

  PcaResult result;
  result.transformed = centered * model.components.transpose();
  result.model = std::move(model);
  return result;
}

/// Densifies sparse feature vectors and fits PCA on them.
inline PcaResult reduce_pca(const std::vector<SparseVec>& vectors, int k) {
  if (vectors.empty()) throw EmptyCorpus("reduce_pca on empty input");
  Eigen::MatrixXd dense(static_cast<Eigen::Index>(vectors.size()), vectors.front().dim);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim != vectors.front().dim) {
      throw DimensionMismatch("reduce_pca: inconsistent vector dims");
    }
    dense.row(static_cast<Eigen::Index>(i)) = vectors[i].dense().transpose();
  }
  return reduce_pca(dense, k);
}

}  // namespace stancefusion
