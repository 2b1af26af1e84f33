#include "caloricflow/caloric_gauge.hpp"

#include "caloricflow/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace caloricflow::gauge {

namespace {

using Mat = Eigen::MatrixXd;
using heat::EventRole;

double l2(const Field& f) { return grid::lp_norm(f, 2.0); }

// Nodewise <v, e_a> for a tangent (or ambient) field against a frame.
Field pair_with_frame(const Field& v, const FrameField& e) {
  const int m = e.m(), d = e.dim();
  Field out(v.grid(), m);
  for (int k = 0; k < v.nodes(); ++k)
    for (int a = 0; a < m; ++a) out.at(k)[a] = kern::mink(v.at(k), e.col(k, a), d);
  return out;
}

// Closest rotation to M (polar factor with the sign fixed so that det = +1).
Mat closest_rotation(const Mat& M) {
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat W = svd.matrixU();
  const Mat V = svd.matrixV();
  if ((W * V.transpose()).determinant() < 0) W.col(W.cols() - 1) *= -1.0;
  return W * V.transpose();
}

// Cayley transform (I - B/2)^{-1} (I + B/2); orthogonal for antisymmetric B.
Mat cayley(const Mat& B) {
  const Mat I = Mat::Identity(B.rows(), B.cols());
  return (I - 0.5 * B).partialPivLu().solve(I + 0.5 * B);
}

Mat node_matrix(const Field& A, int k, int m) {
  Mat out(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) out(a, b) = A.at(k)[a * m + b];
  return out;
}

void frame_to_basis(const FrameField& e, int k, FrameField& out, const Mat& U) {
  const int m = e.m(), d = e.dim();
  for (int b = 0; b < m; ++b) {
    double* dst = out.col(k, b);
    for (int i = 0; i < d; ++i) {
      double acc = 0;
      for (int a = 0; a < m; ++a) acc += e.col(k, a)[i] * U(a, b);
      dst[i] = acc;
    }
  }
}

// Antisymmetric part of <(E_b - F_b) / span, C_a> per node, as an m*m field.
Field frame_rate(const FrameField& E, const FrameField& F, const FrameField& C, double span) {
  const int m = C.m(), d = C.dim();
  Field out(C.grid(), m * m);
  std::vector<double> diffv(static_cast<std::size_t>(d));
  for (int k = 0; k < C.nodes(); ++k) {
    double* o = out.at(k);
    for (int b = 0; b < m; ++b) {
      for (int i = 0; i < d; ++i) diffv[i] = (E.col(k, b)[i] - F.col(k, b)[i]) / span;
      for (int a = 0; a < m; ++a) o[a * m + b] = kern::mink(diffv.data(), C.col(k, a), d);
    }
    for (int a = 0; a < m; ++a)
      for (int b = a; b < m; ++b) {
        const double x = 0.5 * (o[a * m + b] - o[b * m + a]);
        o[a * m + b] = x;
        o[b * m + a] = -x;
      }
  }
  return out;
}

double frobenius_sup(const Field& f) { return grid::sup_norm(f); }

class FrameTransport final : public heat::FlowObserver {
 public:
  FrameTransport(const Grid2D& g, int m, double drift_tol, double probe_offset)
      : m_(m), drift_tol_(drift_tol), delta_(probe_offset), current_(g, m) {}

  void on_start(const MapField& phi0) override {
    for (int k = 0; k < phi0.nodes(); ++k) seed_frame(phi0.at(k), current_.at(k), m_);
  }

  void on_step(double s0, double, const MapField& before, const MapField& after,
               const TangentField* velocity) override {
    if (velocity) sample(s0, before, *velocity);
    const int d = m_ + 1;
    const int n = before.grid().n;
    std::vector<double> row_drift(static_cast<std::size_t>(n), 0.0);
    std::vector<int> row_fail(static_cast<std::size_t>(n), 0);
    parallel_for(0, n, [&](int lo, int hi) {
      for (int j = lo; j < hi; ++j)
        for (int i = 0; i < n; ++i) {
          const int k = j * n + i;
          const double* p = before.at(k);
          const double* q = after.at(k);
          for (int a = 0; a < m_; ++a) {
            double* c = current_.col(k, a);
            kern::transport(p, q, c, d);
            kern::tangent_project(q, c, d);
          }
          double drift = 0;
          for (int a = 0; a < m_; ++a)
            for (int b = a; b < m_; ++b)
              drift = std::max(drift, std::abs(kern::mink(current_.col(k, a), current_.col(k, b), d) -
                                               (a == b ? 1.0 : 0.0)));
          row_drift[j] = std::max(row_drift[j], drift);
          if (!kern::gram_schmidt(q, current_.at(k), m_, d)) row_fail[j] = 1;
        }
    });
    for (int j = 0; j < n; ++j) {
      if (row_fail[j]) throw GaugeError("frame transport degenerated");
      max_drift_ = std::max(max_drift_, row_drift[j]);
    }
    if (max_drift_ > drift_tol_)
      throw GaugeError("frame orthonormality drift " + std::to_string(max_drift_) + " exceeds tolerance");
  }

  void on_event(std::size_t rung, EventRole role, double s, const MapField& phi,
                const TangentField* velocity) override {
    if (frames.size() <= rung) frames.resize(rung + 1);
    switch (role) {
      case EventRole::Centre:
        frames[rung].centre = current_;
        if (velocity) {
          sample(s, phi, *velocity);
          if (cumulative.size() <= rung) cumulative.resize(rung + 1);
          cumulative[rung] = integral_;
        }
        break;
      case EventRole::Before: frames[rung].before = current_; break;
      case EventRole::After: frames[rung].after = current_; break;
      case EventRole::ProbeBefore:
        probe_before_ = current_;
        probe_rung_ = rung;
        break;
      case EventRole::ProbeAfter: {
        if (as_rates.size() <= rung) as_rates.resize(rung + 1);
        const FrameField& centre = frames[rung].centre;
        if (probe_before_ && probe_rung_ == rung)
          as_rates[rung] = frame_rate(current_, *probe_before_, centre, 2.0 * delta_);
        else
          as_rates[rung] = frame_rate(current_, centre, centre, delta_);
        probe_before_.reset();
        break;
      }
    }
  }

  double max_drift() const { return max_drift_; }

  struct Frames {
    FrameField centre;
    std::optional<FrameField> before, after;
  };
  std::vector<Frames> frames;
  std::vector<Field> as_rates;
  /// int_0^{s_j} psi_s ^ psi_t ds in the transported (unaligned) frame, per rung centre.
  std::vector<Field> cumulative;

 private:
  // Trapezoid accumulation of psi_s ^ psi_t over the step sequence.
  void sample(double s, const MapField& phi, const TangentField& velocity) {
    if (s == last_s_) return;
    Field f = wedge(pair_with_frame(heat::tension(phi), current_), pair_with_frame(velocity, current_));
    if (last_s_ < 0) {
      integral_ = Field(f.grid(), f.components());
    } else {
      Field inc = last_f_ + f;
      inc *= 0.5 * (s - last_s_);
      integral_ += inc;
    }
    last_f_ = std::move(f);
    last_s_ = s;
  }

  Field integral_, last_f_;
  double last_s_ = -1;

  int m_;
  double drift_tol_, delta_;
  FrameField current_;
  std::optional<FrameField> probe_before_;
  std::size_t probe_rung_ = 0;
  double max_drift_ = 0;
};

// Log-trapezoid integral from each rung to the last, of a per-rung integrand.
std::vector<Field> integrate_to_end(const std::vector<double>& s, const std::vector<Field>& f) {
  std::vector<Field> out(f.size());
  if (f.empty()) return out;
  out.back() = Field(f.back().grid(), f.back().components());
  for (std::size_t j = f.size() - 1; j-- > 0;) {
    const double a = s[j], b = s[j + 1];
    const double wa = a == 0 ? 0.5 * b : 0.5 * std::log(b / a) * a;
    const double wb = a == 0 ? 0.5 * b : 0.5 * std::log(b / a) * b;
    out[j] = out[j + 1] + wa * f[j] + wb * f[j + 1];
  }
  return out;
}

}  // namespace

double FrameField::orthonormality_defect() const {
  double worst = 0;
  for (int k = 0; k < nodes(); ++k)
    for (int a = 0; a < m_; ++a)
      for (int b = a; b < m_; ++b)
        worst = std::max(worst, std::abs(kern::mink(col(k, a), col(k, b), dim()) - (a == b ? 1.0 : 0.0)));
  return worst;
}

void seed_frame(const double* p, double* frame, int m) {
  const int d = m + 1;
  std::vector<double> v(static_cast<std::size_t>(d));
  int filled = 0;
  for (int axis = 1; axis <= m + 1 && filled < m; ++axis) {
    const int which = axis == m + 1 ? 0 : axis;
    std::fill(v.begin(), v.end(), 0.0);
    v[which] = 1.0;
    kern::tangent_project(p, v.data(), d);
    for (int b = 0; b < filled; ++b) {
      const double c = kern::mink(v.data(), frame + b * d, d);
      for (int i = 0; i < d; ++i) v[i] -= c * frame[b * d + i];
    }
    const double n2 = kern::mink(v.data(), v.data(), d);
    if (!(n2 > 1e-8)) continue;
    const double inv = 1.0 / std::sqrt(n2);
    for (int i = 0; i < d; ++i) frame[filled * d + i] = v[i] * inv;
    ++filled;
  }
  if (filled < m) throw GaugeError("could not seed a tangent frame");
  if (kern::orientation(p, frame, m, d) < 0)
    for (int i = 0; i < d; ++i) frame[(m - 1) * d + i] = -frame[(m - 1) * d + i];
}

const FrameField& CaloricGauge::frame(std::size_t rung, EventRole role) const {
  if (rung >= frames_.size()) throw GaugeError("rung out of range");
  const RungFrames& r = frames_[rung];
  switch (role) {
    case EventRole::Centre: return r.centre;
    case EventRole::Before:
      if (!r.before) throw GaugeError("rung has no companions");
      return *r.before;
    case EventRole::After:
      if (!r.after) throw GaugeError("rung has no companions");
      return *r.after;
    default: throw GaugeError("probe frames are not stored");
  }
}

bool CaloricGauge::has_companions(std::size_t rung) const {
  return rung < frames_.size() && frames_[rung].before && frames_[rung].after;
}

double CaloricGauge::max_as_residual() const {
  double w = 0;
  for (const Field& f : as_residual_) w = std::max(w, frobenius_sup(f));
  return w;
}

GaugeState CaloricGauge::state(std::size_t rung, EventRole role) const {
  const FrameField& e = frame(rung, role);
  const heat::Rung& r = trace_.rungs.at(rung);
  const heat::Snapshot& snap = role == EventRole::Centre ? r.centre : role == EventRole::Before ? *r.before : *r.after;
  GaugeState st;
  st.s = snap.s;
  for (int i = 0; i < 2; ++i) {
    st.psi_x[i] = pair_with_frame(grid::diff(snap.phi, i), e);
    const Field de = grid::diff(e, i);
    const int m = e.m(), d = e.dim();
    Field A(e.grid(), m * m);
    for (int k = 0; k < e.nodes(); ++k) {
      double* o = A.at(k);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) o[a * m + b] = kern::mink(de.at(k) + b * d, e.col(k, a), d);
      for (int a = 0; a < m; ++a)
        for (int b = a; b < m; ++b) {
          const double x = 0.5 * (o[a * m + b] - o[b * m + a]);
          o[a * m + b] = x;
          o[b * m + a] = -x;
        }
    }
    st.A_x[i] = std::move(A);
  }
  st.psi_s = pair_with_frame(snap.dphi_ds, e);
  if (snap.dphi_dt) st.psi_t = pair_with_frame(*snap.dphi_dt, e);
  if (role == EventRole::Centre && rung < a_t_.size()) st.A_t = a_t_[rung];
  return st;
}

CaloricGauge build_caloric_gauge(const MapField& phi0, const OrthoFrame& e_inf, const GaugeConfig& cfg,
                                 const TangentField* phi1) {
  const int m = phi0.m(), d = phi0.dim();
  if (e_inf.m() != m) throw GaugeError("e_inf has the wrong target dimension");
  if (!(cfg.probe_fraction >= 0 && cfg.probe_fraction < 0.5)) throw GaugeError("probe_fraction must lie in [0, 1/2)");
  const Grid2D& g = phi0.grid();
  if (phi0.at_infinity() && kern::dist(phi0.at_infinity()->data(), e_inf.base().vec().data(), d) > 1e-8)
    throw GaugeError("e_inf must be based at phi(infinity)");

  heat::HeatFlowConfig flow = cfg.flow;
  flow.probe_offset = cfg.probe_fraction * flow.ds(g);
  FrameTransport observer(g, m, cfg.drift_tol, flow.probe_offset);

  CaloricGauge out(e_inf);
  out.trace_ = heat::run(phi0, flow, phi1, &observer);
  const heat::HeatFlowTrace& tr = out.trace_;
  if (cfg.require_tail && !tr.tail_met)
    throw GaugeError("tail criterion unmet by s_max = " + std::to_string(flow.s_max) + "; raise s_max");
  out.max_drift_ = observer.max_drift();

  // Limit point of the flow and the spread around it.
  const MapField& phi_end = tr.rungs.back().centre.phi;
  std::vector<double> limit(static_cast<std::size_t>(d), 0.0);
  for (int k = 0; k < phi_end.nodes(); ++k)
    for (int i = 0; i < d; ++i) limit[i] += phi_end.at(k)[i];
  kern::normalize_point(limit.data(), d);
  for (int k = 0; k < phi_end.nodes(); ++k)
    out.tail_defect_ = std::max(out.tail_defect_, kern::dist(phi_end.at(k), limit.data(), d));
  if (cfg.require_tail && out.tail_defect_ > cfg.frame_tail_tol)
    throw GaugeError("flow has not settled (spread " + std::to_string(out.tail_defect_) + "); raise s_max");

  // U(x): rotation aligning the transported final frame with e_inf.
  const FrameField& last = observer.frames.back().centre;
  const double* q = e_inf.base().vec().data();
  out.alignment_ = Field(g, m * m);
  std::vector<double> col(static_cast<std::size_t>(d));
  std::vector<Mat> U(static_cast<std::size_t>(g.nodes()));
  for (int k = 0; k < g.nodes(); ++k) {
    Mat M(m, m);
    for (int a = 0; a < m; ++a) {
      std::copy(last.col(k, a), last.col(k, a) + d, col.begin());
      kern::transport(phi_end.at(k), q, col.data(), d);
      for (int b = 0; b < m; ++b) M(a, b) = kern::mink(col.data(), e_inf.col(b).data(), d);
    }
    U[k] = closest_rotation(M);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) out.alignment_.at(k)[a * m + b] = U[k](a, b);
  }

  auto rotate = [&](const FrameField& e) {
    FrameField r(g, m);
    for (int k = 0; k < g.nodes(); ++k) frame_to_basis(e, k, r, U[k]);
    return r;
  };
  out.frames_.reserve(tr.rungs.size());
  for (std::size_t j = 0; j < tr.rungs.size(); ++j) {
    const auto& f = observer.frames.at(j);
    CaloricGauge::RungFrames rf{rotate(f.centre), std::nullopt, std::nullopt};
    if (f.before) rf.before = rotate(*f.before);
    if (f.after) rf.after = rotate(*f.after);
    out.frames_.push_back(std::move(rf));
  }

  // A_s = <D_s e_b, e_a> transforms as U^T A_s U under the constant-in-s rotation; the norm is invariant.
  out.as_residual_ = std::move(observer.as_rates);
  for (Field& f : out.as_residual_) {
    if (f.nodes() == 0) continue;
    f = grid::magnitude(f);
  }

  // A_t(s) = int_s^{s_final} psi_s ^ psi_t, accumulated step by step in the transported frame and
  // then conjugated by U (the wedge of U^T X and U^T Y is U^T (X ^ Y) U).
  if (phi1) {
    const std::size_t J = tr.rungs.size();
    const Field& total = observer.cumulative.at(J - 1);
    out.a_t_.reserve(J);
    for (std::size_t j = 0; j < J; ++j) {
      Field a(g, m * m);
      for (int k = 0; k < g.nodes(); ++k) {
        const Mat I = node_matrix(total, k, m) - node_matrix(observer.cumulative[j], k, m);
        const Mat r = U[k].transpose() * I * U[k];
        for (int x = 0; x < m; ++x)
          for (int y = 0; y < m; ++y) a.at(k)[x * m + y] = r(x, y);
      }
      out.a_t_.push_back(std::move(a));
    }
  }
  return out;
}

// ---- matrix helpers --------------------------------------------------------

Field apply(const Field& A, const Field& u) {
  const int m = u.components();
  if (A.components() != m * m) throw GaugeError("matrix and vector fields disagree in size");
  Field out(u.grid(), m);
  for (int k = 0; k < u.nodes(); ++k) {
    const double* a = A.at(k);
    const double* x = u.at(k);
    double* o = out.at(k);
    for (int r = 0; r < m; ++r) {
      double acc = 0;
      for (int c = 0; c < m; ++c) acc += a[r * m + c] * x[c];
      o[r] = acc;
    }
  }
  return out;
}

Field wedge(const Field& X, const Field& Y) {
  X.require_compatible(Y);
  const int m = X.components();
  Field out(X.grid(), m * m);
  for (int k = 0; k < X.nodes(); ++k) {
    const double* x = X.at(k);
    const double* y = Y.at(k);
    double* o = out.at(k);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) o[a * m + b] = x[a] * y[b] - y[a] * x[b];
  }
  return out;
}

Field wedge_apply(const Field& X, const Field& Y, const Field& Z) {
  X.require_compatible(Y);
  X.require_compatible(Z);
  const int m = X.components();
  Field out(X.grid(), m);
  for (int k = 0; k < X.nodes(); ++k) {
    const double* x = X.at(k);
    const double* y = Y.at(k);
    const double* z = Z.at(k);
    double yz = 0, xz = 0;
    for (int a = 0; a < m; ++a) {
      yz += y[a] * z[a];
      xz += x[a] * z[a];
    }
    for (int a = 0; a < m; ++a) out.at(k)[a] = x[a] * yz - y[a] * xz;
  }
  return out;
}

Field covariant_diff(const Field& u, const Field& A, int axis) { return grid::diff(u, axis) + apply(A, u); }

// ---- identities --------------------------------------------------------------

StructureResidual structure_residual(const GaugeState& st) {
  StructureResidual r;
  const Field d1p2 = covariant_diff(st.psi_x[1], st.A_x[0], 0);
  const Field d2p1 = covariant_diff(st.psi_x[0], st.A_x[1], 1);
  r.torsion = l2(d1p2 - d2p1);
  r.torsion_scale = std::max(l2(d1p2), l2(d2p1));

  const Field a12 = grid::diff(st.A_x[1], 0);
  const Field a21 = grid::diff(st.A_x[0], 1);
  const int m = st.psi_s.components();
  Field comm(st.psi_s.grid(), m * m);
  for (int k = 0; k < comm.nodes(); ++k) {
    const Mat A1 = node_matrix(st.A_x[0], k, m), A2 = node_matrix(st.A_x[1], k, m);
    const Mat c = A1 * A2 - A2 * A1;
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) comm.at(k)[a * m + b] = c(a, b);
  }
  const Field ww = wedge(st.psi_x[0], st.psi_x[1]);
  r.curvature = l2(a12 - a21 + comm + ww);
  r.curvature_scale = std::max({l2(a12), l2(a21), l2(comm), l2(ww)});

  const Field div = covariant_diff(st.psi_x[0], st.A_x[0], 0) + covariant_diff(st.psi_x[1], st.A_x[1], 1);
  r.ps_frame = l2(st.psi_s - div);
  r.ps_scale = l2(st.psi_s);
  return r;
}

std::vector<StructureResidual> structure_residuals(const CaloricGauge& g) {
  std::vector<StructureResidual> out;
  out.reserve(g.rungs());
  for (std::size_t j = 0; j < g.rungs(); ++j) out.push_back(structure_residual(g.state(j)));
  return out;
}

namespace {

Field s_derivative(const Field& fm, const Field& f0, const Field& fp, double a, double b) {
  Field out(f0.grid(), f0.components());
  auto o = out.values();
  auto m = fm.values(), z = f0.values(), p = fp.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = grid::three_point_derivative(m[i], z[i], p[i], a, b);
  return out;
}

// D_i D_i u - (u ^ psi_i) psi_i
Field covariant_heat_rhs(const Field& u, const GaugeState& st) {
  Field out(u.grid(), u.components());
  for (int i = 0; i < 2; ++i) {
    const Field du = covariant_diff(u, st.A_x[i], i);
    out += covariant_diff(du, st.A_x[i], i);
    out -= wedge_apply(u, st.psi_x[i], st.psi_x[i]);
  }
  return out;
}

}  // namespace

EvolutionResidual evolution_residual(const CaloricGauge& g, std::size_t rung) {
  if (!g.has_companions(rung)) throw GaugeError("evolution residual needs companion snapshots");
  const GaugeState c = g.state(rung, EventRole::Centre);
  const GaugeState bm = g.state(rung, EventRole::Before);
  const GaugeState bp = g.state(rung, EventRole::After);
  const double a = c.s - bm.s, b = bp.s - c.s;
  EvolutionResidual r;
  r.s = c.s;

  double pe = 0, pes = 0, sx = 0, sxs = 0, px = 0, pxs = 0;
  for (int i = 0; i < 2; ++i) {
    const Field dpsi = s_derivative(bm.psi_x[i], c.psi_x[i], bp.psi_x[i], a, b);
    const Field dxs = covariant_diff(c.psi_s, c.A_x[i], i);
    pe += std::pow(l2(dpsi - dxs), 2);
    pes += std::pow(std::max(l2(dpsi), l2(dxs)), 2);

    const Field dA = s_derivative(bm.A_x[i], c.A_x[i], bp.A_x[i], a, b);
    const Field w = wedge(c.psi_s, c.psi_x[i]);
    sx += std::pow(l2(dA + w), 2);
    sxs += std::pow(std::max(l2(dA), l2(w)), 2);

    const Field rhs = covariant_heat_rhs(c.psi_x[i], c);
    px += std::pow(l2(dpsi - rhs), 2);
    pxs += std::pow(std::max(l2(dpsi), l2(rhs)), 2);
  }
  r.psi_evolve = std::sqrt(pe);
  r.psi_evolve_scale = std::sqrt(pes);
  r.sax = std::sqrt(sx);
  r.sax_scale = std::sqrt(sxs);
  r.psix_heat = std::sqrt(px);
  r.psix_scale = std::sqrt(pxs);

  const Field dps = s_derivative(bm.psi_s, c.psi_s, bp.psi_s, a, b);
  const Field rhs_s = covariant_heat_rhs(c.psi_s, c);
  r.psis_heat = l2(dps - rhs_s);
  r.psis_scale = std::max(l2(dps), l2(rhs_s));

  if (c.psi_t && bm.psi_t && bp.psi_t) {
    const Field dpt = s_derivative(*bm.psi_t, *c.psi_t, *bp.psi_t, a, b);
    const Field rhs_t = covariant_heat_rhs(*c.psi_t, c);
    r.dst = l2(dpt - rhs_t);
    r.dst_scale = std::max(l2(dpt), l2(rhs_t));
  }
  return r;
}

std::vector<EvolutionResidual> evolution_residuals(const CaloricGauge& g) {
  std::vector<EvolutionResidual> out;
  for (std::size_t j = 0; j < g.rungs(); ++j)
    if (g.has_companions(j)) out.push_back(evolution_residual(g, j));
  return out;
}

PsisComparison psis_comparison(const CaloricGauge& g) {
  PsisComparison rep;
  if (g.rungs() == 0) return rep;
  const Field mag0 = grid::magnitude(g.state(0).psi_s);
  const grid::HeatSemigroup semi(mag0);
  const std::vector<Field> scheme = heat::scheme_semigroup(g.trace(), mag0);
  for (std::size_t j = 0; j < g.rungs(); ++j) {
    const GaugeState st = g.state(j);
    const Field mag = grid::magnitude(st.psi_s);
    const Field cont = semi.at(st.s);
    double worst = 0, worst_scheme = 0;
    for (int k = 0; k < mag.nodes(); ++k) {
      worst = std::max(worst, mag.at(k)[0] - cont.at(k)[0]);
      worst_scheme = std::max(worst_scheme, mag.at(k)[0] - scheme[j].at(k)[0]);
    }
    rep.violation_per_rung.push_back(worst);
    rep.scheme_violation_per_rung.push_back(worst_scheme);
    rep.max_violation = std::max(rep.max_violation, worst);
    rep.scheme_violation = std::max(rep.scheme_violation, worst_scheme);
  }
  return rep;
}

ConnectionScan connection_bound_scan(const CaloricGauge& g) {
  ConnectionScan scan;
  const std::vector<double> s = g.trace().s_values();
  std::vector<GaugeState> states;
  states.reserve(g.rungs());
  std::array<std::vector<Field>, 2> sources;
  for (std::size_t j = 0; j < g.rungs(); ++j) {
    states.push_back(g.state(j));
    for (int i = 0; i < 2; ++i) sources[i].push_back(wedge(states.back().psi_s, states.back().psi_x[i]));
  }
  const std::array<std::vector<Field>, 2> rebuilt{integrate_to_end(s, sources[0]), integrate_to_end(s, sources[1])};
  for (std::size_t j = 0; j < g.rungs(); ++j) {
    const GaugeState& st = states[j];
    Field both(st.A_x[0].grid(), 2 * st.A_x[0].components());
    const int c = st.A_x[0].components();
    for (int k = 0; k < both.nodes(); ++k)
      for (int q = 0; q < c; ++q) {
        both.at(k)[q] = st.A_x[0].at(k)[q];
        both.at(k)[c + q] = st.A_x[1].at(k)[q];
      }
    const double ainf = grid::sup_norm(both), a2 = l2(both);
    const double v = std::sqrt(st.s) * ainf;
    scan.sqrt_s_Ainf.push_back(v);
    if (st.s > 0) scan.sup_sqrt_s_Ainf = std::max(scan.sup_sqrt_s_Ainf, v);
    scan.sup_A2 = std::max(scan.sup_A2, a2);
    const double gap = std::hypot(l2(st.A_x[0] - rebuilt[0][j]), l2(st.A_x[1] - rebuilt[1][j]));
    scan.reconstruction_gap = std::max(scan.reconstruction_gap, gap);
    scan.reconstruction_scale = std::max(scan.reconstruction_scale, a2);
  }
  return scan;
}

CovariantHeatResult covariant_heat_solve(const CaloricGauge& g, const Field& u0) {
  const int m = g.m();
  if (u0.components() != m) throw GaugeError("u0 must have m components");
  if (!(u0.grid() == g.trace().grid)) throw GaugeError("u0 lives on a different grid");
  const Grid2D& grd = u0.grid();
  const int n = grd.n;
  const double h = grd.h();
  CovariantHeatResult res;
  if (g.rungs() == 0) return res;

  // Per node: Cayley links to the four neighbours (+x, -x, +y, -y) and the curvature operator.
  struct Background {
    std::vector<Mat> link;  // 4 per node
    std::vector<Mat> curv;
  };
  auto build = [&](std::size_t j) {
    const GaugeState st = g.state(j);
    Background bg;
    bg.link.resize(static_cast<std::size_t>(4 * grd.nodes()));
    bg.curv.resize(static_cast<std::size_t>(grd.nodes()));
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const int k = grd.index(x, y);
        const int nb[4] = {grd.index(x + 1, y), grd.index(x - 1, y), grd.index(x, y + 1), grd.index(x, y - 1)};
        for (int dir = 0; dir < 4; ++dir) {
          const Field& A = st.A_x[dir / 2];
          const Mat mid = 0.5 * (node_matrix(A, k, m) + node_matrix(A, nb[dir], m));
          bg.link[4 * k + dir] = cayley((dir % 2 == 0 ? h : -h) * mid);
        }
        Mat C = Mat::Zero(m, m);
        for (int i = 0; i < 2; ++i) {
          Eigen::Map<const Eigen::VectorXd> p(st.psi_x[i].at(k), m);
          C += p.squaredNorm() * Mat::Identity(m, m) - p * p.transpose();
        }
        bg.curv[k] = C;
      }
    return bg;
  };

  const Field mag0 = grid::magnitude(u0);
  const grid::HeatSemigroup semi(mag0);
  const std::vector<Field> scheme = heat::scheme_semigroup(g.trace(), mag0);
  auto energy = [](const Field& f) {
    double e = 0;
    for (double v : f.values()) e += v * v;
    return e * f.grid().h() * f.grid().h();
  };
  auto record = [&](std::size_t j, const Field& u) {
    const Field mag = grid::magnitude(u);
    const Field cont = semi.at(g.trace().rungs[j].centre.s);
    double worst = 0, worst_scheme = 0;
    for (int k = 0; k < mag.nodes(); ++k) {
      worst = std::max(worst, mag.at(k)[0] - cont.at(k)[0]);
      worst_scheme = std::max(worst_scheme, mag.at(k)[0] - scheme[j].at(k)[0]);
    }
    res.continuum_violation_per_rung.push_back(worst);
    res.scheme_violation = std::max(res.scheme_violation, worst_scheme);
    res.u.push_back(u);
  };

  Field u = u0;
  double s = 0;
  record(0, u);
  auto step_it = g.trace().step_ends.begin();
  const double ih2 = 1.0 / (h * h);
  for (std::size_t j = 1; j < g.rungs(); ++j) {
    const Background bg = build(j - 1);
    const double target = g.trace().rungs[j].centre.s;
    while (s < target && step_it != g.trace().step_ends.end()) {
      const double ds = *step_it - s;
      const double e_before = energy(u);
      Field next(grd, m);
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const int k = grd.index(x, y);
          const int nb[4] = {grd.index(x + 1, y), grd.index(x - 1, y), grd.index(x, y + 1), grd.index(x, y - 1)};
          Eigen::Map<const Eigen::VectorXd> uk(u.at(k), m);
          Eigen::VectorXd acc = -4.0 * uk;
          for (int dir = 0; dir < 4; ++dir)
            acc += bg.link[4 * k + dir] * Eigen::Map<const Eigen::VectorXd>(u.at(nb[dir]), m);
          Eigen::Map<Eigen::VectorXd>(next.at(k), m) = uk + ds * (ih2 * acc - bg.curv[k] * uk);
        }
      u = std::move(next);
      res.max_energy_increase = std::max(res.max_energy_increase, energy(u) - e_before);
      s = *step_it++;
    }
    record(j, u);
  }
  return res;
}

}  // namespace caloricflow::gauge
