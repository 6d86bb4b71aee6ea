#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "vidembed/data/rng.hpp"
#include "vidembed/numeric/tensor.hpp"

namespace vidembed {

struct ProjectedPoint {
  std::string id;
  std::optional<std::size_t> label;
  double x = 0.0;
  double y = 0.0;
};

struct Projection2D {
  std::vector<ProjectedPoint> points;
  std::array<double, 2> explained{0.0, 0.0};  // share of total variance per component
  std::array<std::vector<double>, 2> components;
};

struct PowerIterationOptions {
  double tolerance = 1e-9;
  std::size_t max_iterations = 10000;
};

namespace detail {

// Covariance-vector product C·v with C = XcᵀXc/(N-1), applied as Xcᵀ(Xc·v)
// so the D×D matrix is never materialised.
struct Covariance {
  const std::vector<double>& xc;
  std::size_t n, d;

  std::vector<double> apply(const std::vector<double>& v) const {
    std::vector<double> xv(n, 0.0), out(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += xc[i * d + j] * v[j];
      xv[i] = s;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) out[j] += xc[i * d + j] * xv[i];
    for (auto& o : out) o /= static_cast<double>(n - 1);
    return out;
  }
};

inline double vdot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

/// Mean-centres the rows and projects them onto the top two principal
/// components, found by power iteration with deflation on the covariance.
/// Each component is signed so its largest-magnitude loading is positive.
template <std::floating_point T>
Projection2D project_2d(const Tensor<T>& embeddings, const std::vector<std::string>& ids,
                        const std::vector<std::optional<std::size_t>>& labels, PowerIterationOptions opt = {}) {
  const std::size_t n = embeddings.rows(), d = embeddings.cols();
  require(embeddings.rank() == 2 && n >= 3, Errc::InsufficientData, "project_2d needs at least 3 rows");
  require(ids.size() == n && (labels.empty() || labels.size() == n), Errc::ShapeMismatch,
          "one id (and label) per row required");

  std::vector<double> mean(d, 0.0), xc(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += embeddings.at(i, j);
  for (auto& m : mean) m /= static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      xc[i * d + j] = embeddings.at(i, j) - mean[j];
      total += xc[i * d + j] * xc[i * d + j];
    }
  total /= static_cast<double>(n - 1);
  require(total >= 1e-12, Errc::DegenerateData, "total variance below 1e-12");

  detail::Covariance cov{xc, n, d};
  Projection2D out;
  std::array<double, 2> lambda{0.0, 0.0};
  CounterRng rng(0x9ca5eedULL);
  for (std::size_t comp = 0; comp < 2; ++comp) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.normal();
    auto deflate = [&](std::vector<double>& w) {
      for (std::size_t prev = 0; prev < comp; ++prev) {
        const double c = detail::vdot(out.components[prev], w);
        for (std::size_t j = 0; j < d; ++j) w[j] -= c * out.components[prev][j];
      }
    };
    deflate(v);
    const double nv = std::sqrt(detail::vdot(v, v));
    bool null_space = nv < 1e-300;  // d == 1 leaves nothing after deflation
    if (!null_space)
      for (auto& x : v) x /= nv;
    for (std::size_t it = 0; !null_space && it < opt.max_iterations; ++it) {
      auto w = cov.apply(v);
      deflate(w);
      const double nw = std::sqrt(detail::vdot(w, w));
      if (nw < 1e-300) {
        null_space = true;  // remaining variance is zero; any orthogonal v will do
        break;
      }
      double delta = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double nx = w[j] / nw;
        delta += (nx - v[j]) * (nx - v[j]);
        v[j] = nx;
      }
      if (std::sqrt(delta) < opt.tolerance) break;
    }
    lambda[comp] = null_space ? 0.0 : std::max(0.0, detail::vdot(v, cov.apply(v)));
    std::size_t big = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(v[j]) > std::abs(v[big])) big = j;
    if (v[big] < 0)
      for (auto& x : v) x = -x;
    out.components[comp] = std::move(v);
  }

  for (std::size_t c = 0; c < 2; ++c) out.explained[c] = std::clamp(lambda[c] / total, 0.0, 1.0);
  out.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = out.points[i];
    p.id = ids[i];
    if (!labels.empty()) p.label = labels[i];
    for (std::size_t j = 0; j < d; ++j) {
      p.x += xc[i * d + j] * out.components[0][j];
      p.y += xc[i * d + j] * out.components[1][j];
    }
  }
  return out;
}

inline std::string projection_csv(const Projection2D& p) {
  std::string out = "id,label,x,y\n";
  char buf[128];
  for (const auto& pt : p.points) {
    std::snprintf(buf, sizeof buf, ",%s,%.9g,%.9g\n", pt.label ? std::to_string(*pt.label).c_str() : "", pt.x, pt.y);
    out += pt.id + buf;
  }
  return out;
}

inline std::string explained_variance_csv(const Projection2D& p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "component,explained_variance\n1,%.12g\n2,%.12g\n", p.explained[0], p.explained[1]);
  return buf;
}

}  // namespace vidembed
