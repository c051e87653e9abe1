#include "kamlab/trigpoly.hpp"

#include <json.hpp>

namespace kamlab {

namespace {
std::vector<int> negate(const std::vector<int>& k) {
  std::vector<int> n(k.size());
  for (size_t i = 0; i < k.size(); ++i) n[i] = -k[i];
  return n;
}
bool is_zero_vec(const std::vector<int>& k) {
  for (int v : k)
    if (v != 0) return false;
  return true;
}
}  // namespace

void TrigPoly::add_mode(const std::vector<int>& k, const PolyP& h, bool with_conjugate) {
  if ((int)k.size() != m_) throw KamError("wave vector dimension mismatch");
  auto it = terms_.find(k);
  if (it == terms_.end()) {
    if (!h.is_zero()) terms_[k] = h;
  } else {
    it->second = it->second + h;
    if (it->second.is_zero()) terms_.erase(it);
  }
  if (real_ && with_conjugate && !is_zero_vec(k)) add_mode(negate(k), h.conj(), false);
}

void TrigPoly::set_mode_raw(const std::vector<int>& k, const PolyP& h) {
  if (h.is_zero())
    terms_.erase(k);
  else
    terms_[k] = h;
}

const PolyP* TrigPoly::mode(const std::vector<int>& k) const {
  auto it = terms_.find(k);
  return it == terms_.end() ? nullptr : &it->second;
}

void TrigPoly::prune() {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (it->second.is_zero())
      it = terms_.erase(it);
    else
      ++it;
  }
}

cplx TrigPoly::eval_complex(const std::vector<double>& phi, const std::vector<double>& p) const {
  cplx acc = 0.0;
  for (auto& [k, h] : terms_) {
    double phase = 0.0;
    for (int i = 0; i < m_; ++i) phase += k[i] * phi[i];
    acc += h.eval(p) * std::polar(1.0, TWO_PI * phase);
  }
  return acc;
}

double TrigPoly::eval(const std::vector<double>& phi, const std::vector<double>& p) const {
  return eval_complex(phi, p).real();
}

TrigPoly TrigPoly::deriv_angle(int i) const {
  TrigPoly r(m_, pdim_, real_, cap_);
  for (auto& [k, h] : terms_) {
    if (k[i] == 0) continue;
    r.set_mode_raw(k, h * cplx(0.0, TWO_PI * k[i]));
  }
  return r;
}

TrigPoly TrigPoly::deriv_p(int j) const {
  TrigPoly r(m_, pdim_, real_, cap_);
  for (auto& [k, h] : terms_) {
    PolyP d = h.derivative(j);
    if (!d.is_zero()) r.set_mode_raw(k, d);
  }
  return r;
}

TrigPoly TrigPoly::scale(double s) const {
  TrigPoly r(m_, pdim_, real_, cap_);
  if (s == 0.0) return r;
  for (auto& [k, h] : terms_) r.set_mode_raw(k, h * cplx(s));
  return r;
}

TrigPoly TrigPoly::operator+(const TrigPoly& o) const {
  TrigPoly r = *this;
  for (auto& [k, h] : o.terms_) {
    auto it = r.terms_.find(k);
    if (it == r.terms_.end())
      r.terms_[k] = h;
    else {
      it->second = it->second + h;
      if (it->second.is_zero()) r.terms_.erase(it);
    }
  }
  return r;
}

TrigPoly TrigPoly::operator-(const TrigPoly& o) const { return *this + o.scale(-1.0); }

TrigPoly TrigPoly::scale_coeffs(const PolyP& q) const {
  TrigPoly r(m_, pdim_, real_, cap_);
  for (auto& [k, h] : terms_) {
    PolyP prod = h.mul(q, cap_);
    if (!prod.is_zero()) r.set_mode_raw(k, prod);
  }
  return r;
}

TrigPoly TrigPoly::average_over(const std::vector<int>& zeroed_axes) const {
  TrigPoly r(m_, pdim_, real_, cap_);
  for (auto& [k, h] : terms_) {
    bool keep = true;
    for (int ax : zeroed_axes)
      if (k[ax] != 0) keep = false;
    if (keep) r.set_mode_raw(k, h);
  }
  return r;
}

bool TrigPoly::check_reality(double) const {
  for (auto& [k, h] : terms_) {
    auto it = terms_.find(negate(k));
    if (it == terms_.end()) return false;
    if (!(it->second == h.conj())) return false;
  }
  return true;
}

TrigPoly poisson_bracket_grad(const std::vector<PolyP>& dH0dp, const TrigPoly& G) {
  TrigPoly acc(G.dim_angle(), G.pdim(), G.is_real(), G.degree_cap());
  for (size_t j = 0; j < dH0dp.size(); ++j) {
    TrigPoly dj = G.deriv_angle((int)j);
    if (!dj.empty()) acc = acc + dj.scale_coeffs(dH0dp[j]);
  }
  if (G.dim_angle() == G.pdim() + 1) acc = acc + G.deriv_angle(G.dim_angle() - 1);
  return acc;
}

std::pair<TrigPoly, TrigPoly> tail_truncate(const TrigPoly& g, int K) {
  if (K < 0) throw KamError("tail_truncate: K must be >= 0");
  TrigPoly head(g.dim_angle(), g.pdim(), g.is_real(), g.degree_cap());
  TrigPoly tail = head;
  for (auto& [k, h] : g.terms()) {
    int raw_max = 0;
    for (int v : k) raw_max = std::max(raw_max, std::abs(v));
    if (raw_max <= K)
      head.set_mode_raw(k, h);
    else
      tail.set_mode_raw(k, h);
  }
  return {head, tail};
}

NormBudget cl_norm(const TrigPoly& g, int l, const PBox& box, int angle_samples,
                   int p_samples) {
  if (l > 3) throw KamError("cl_norm supports orders up to 3 only");
  if (box.dim() != g.pdim()) throw KamError("cl_norm: box dimension mismatch");
  NormBudget nb;
  nb.order = l;
  nb.box = box;
  nb.angle_samples = angle_samples;
  nb.p_samples = p_samples;

  for (auto& [k, h] : g.terms()) {
    double amp = h.sup_abs(box, p_samples);
    nb.analytic_bound += std::pow(TWO_PI * bracket_norm(k), l) * amp;
  }

  // Enumerate all partial derivatives of total order <= l over (angles, p).
  int nd = g.dim_angle() + g.pdim();
  std::vector<std::vector<int>> multis;
  std::vector<int> cur(nd, 0);
  std::function<void(int, int)> rec = [&](int pos, int remaining) {
    if (pos == nd) {
      multis.push_back(cur);
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      cur[pos] = e;
      rec(pos + 1, remaining - e);
    }
    cur[pos] = 0;
  };
  rec(0, l);

  std::vector<std::vector<double>> agrid(g.dim_angle());
  for (auto& ax : agrid) ax = torus_grid(angle_samples);
  std::vector<std::vector<double>> pgrid(g.pdim());
  for (int i = 0; i < g.pdim(); ++i) pgrid[i] = linspace(box.lo[i], box.hi[i], p_samples);

  double sup = 0.0;
  for (auto& mi : multis) {
    TrigPoly d = g;
    for (int i = 0; i < g.dim_angle(); ++i)
      for (int e = 0; e < mi[i]; ++e) d = d.deriv_angle(i);
    for (int j = 0; j < g.pdim(); ++j)
      for (int e = 0; e < mi[g.dim_angle() + j]; ++e) d = d.deriv_p(j);
    if (d.empty()) continue;

    std::vector<int> idx(nd, 0);
    std::vector<double> phi(g.dim_angle()), p(g.pdim());
    while (true) {
      for (int i = 0; i < g.dim_angle(); ++i) phi[i] = agrid[i][idx[i]];
      for (int j = 0; j < g.pdim(); ++j) p[j] = pgrid[j][idx[g.dim_angle() + j]];
      sup = std::max(sup, std::abs(d.eval_complex(phi, p)));
      int i = 0;
      for (; i < nd; ++i) {
        int lim = i < g.dim_angle() ? angle_samples : p_samples;
        if (++idx[i] < lim) break;
        idx[i] = 0;
      }
      if (i == nd) break;
    }
  }
  nb.sampled_sup = sup;
  nb.value = std::max(nb.analytic_bound, nb.sampled_sup);
  return nb;
}

double kappa_m(int m, int cutoff) {
  // sum over Z^m of [k]^(-m-1): group by shells [k] = j (the zero vector
  // contributes 1 since [0] = 1).
  double acc = 1.0;
  for (int j = 1; j <= cutoff; ++j) {
    double shell = std::pow(2.0 * j + 1.0, m) - std::pow(2.0 * j - 1.0, m);
    acc += shell * std::pow((double)j, -m - 1);
  }
  return acc;
}

double Mollifier::q(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

double Mollifier::operator()(double x) const {
  double a = std::fabs(x);
  if (a <= 1.0) return 1.0;
  if (a >= 2.0) return 0.0;
  double qa = q(2.0 - a), qb = q(a - 1.0);
  return qa / (qa + qb);
}

std::string trig_to_json(const TrigPoly& g) {
  nlohmann::json j;
  j["dim"] = g.dim_angle();
  j["pdim"] = g.pdim();
  j["cap"] = g.degree_cap();
  j["reality"] = g.is_real();
  nlohmann::json terms = nlohmann::json::array();
  for (auto& [k, h] : g.terms()) {
    nlohmann::json t;
    t["k"] = k;
    nlohmann::json poly = nlohmann::json::array();
    for (auto& [m, c] : h.terms())
      poly.push_back({m, c.real(), c.imag()});
    t["poly"] = poly;
    terms.push_back(t);
  }
  j["terms"] = terms;
  return j.dump();
}

TrigPoly trig_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TrigPoly g(j.at("dim").get<int>(), j.at("pdim").get<int>(), j.at("reality").get<bool>(),
             j.at("cap").get<int>());
  for (auto& t : j.at("terms")) {
    PolyP h(g.pdim());
    for (auto& row : t.at("poly")) {
      std::vector<int> m = row.at(0).get<std::vector<int>>();
      h.add_term(m, cplx(row.at(1).get<double>(), row.at(2).get<double>()));
    }
    g.set_mode_raw(t.at("k").get<std::vector<int>>(), h);
  }
  return g;
}

}  // namespace kamlab
