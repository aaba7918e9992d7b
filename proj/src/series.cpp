#include "clforge/series.hpp"

#include <stdexcept>

namespace clf {

namespace {

int weight_of(const MultiIndex& m) { return 2 * m[0] + m[1] + m[2] + m[3]; }

}  // namespace

SeriesSpace::SeriesSpace(std::vector<Axis> axes, int max_weight) : axes_(std::move(axes)), max_weight_(max_weight) {
  std::vector<MultiIndex> level{MultiIndex{}};
  std::map<MultiIndex, int> seen{{MultiIndex{}, 0}};
  exps_.push_back(MultiIndex{});
  for (std::size_t i = 0; i < exps_.size(); ++i) {
    for (Axis a : axes_) {
      const MultiIndex n = plus(exps_[i], a);
      if (weight_of(n) > max_weight_ || seen.count(n)) continue;
      seen.emplace(n, static_cast<int>(exps_.size()));
      exps_.push_back(n);
    }
  }
  lookup_ = std::move(seen);
  for (const MultiIndex& m : exps_) weights_.push_back(weight_of(m));
  for (std::size_t a = 0; a < exps_.size(); ++a)
    for (std::size_t b = 0; b < exps_.size(); ++b) {
      if (weights_[a] + weights_[b] > max_weight_) continue;
      MultiIndex s{};
      for (int k = 0; k < 4; ++k) s[k] = static_cast<std::uint8_t>(exps_[a][k] + exps_[b][k]);
      products_.push_back({static_cast<int>(a), static_cast<int>(b), lookup_.at(s)});
    }
}

int SeriesSpace::index(const MultiIndex& m) const {
  auto it = lookup_.find(m);
  return it == lookup_.end() ? -1 : it->second;
}

Series::Series(std::shared_ptr<const SeriesSpace> space) : space_(std::move(space)), c_(space_->size(), 0.0) {}

Series Series::constant(std::shared_ptr<const SeriesSpace> space, double c) {
  Series s(std::move(space));
  s.c_[0] = c;
  return s;
}

Series Series::coordinate(std::shared_ptr<const SeriesSpace> space, Axis a, double base) {
  Series s = constant(space, base);
  const int i = space->index(plus(MultiIndex{}, a));
  if (i >= 0) s.c_[static_cast<std::size_t>(i)] = 1.0;
  return s;
}

double Series::coefficient(const MultiIndex& m) const {
  const int i = space_->index(m);
  return i < 0 ? 0.0 : c_[static_cast<std::size_t>(i)];
}

Series& Series::operator+=(const Series& o) {
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

Series& Series::operator-=(const Series& o) {
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

Series Series::scaled(double k) const {
  Series r = *this;
  for (double& x : r.c_) x *= k;
  return r;
}

Series operator*(const Series& a, const Series& b) {
  Series r(a.space_);
  for (const auto& p : a.space_->products()) r.c_[p.out] += a.c_[p.a] * b.c_[p.b];
  return r;
}

Series Series::derivative(Axis a) const {
  Series r(space_);
  const int k = axis_index(a);
  for (std::size_t i = 0; i < c_.size(); ++i) {
    const MultiIndex& m = space_->exponent(i);
    if (m[k] == 0 || c_[i] == 0.0) continue;
    MultiIndex d = m;
    d[k] -= 1;
    r.c_[static_cast<std::size_t>(space_->index(d))] += c_[i] * m[k];
  }
  return r;
}

Series Series::derivative(const MultiIndex& m) const {
  Series r = *this;
  for (Axis a : kAllAxes)
    for (int k = 0; k < m[axis_index(a)]; ++k) r = r.derivative(a);
  return r;
}

Series Series::integrate_t() const {
  Series r(space_);
  for (std::size_t i = 0; i < c_.size(); ++i) {
    if (c_[i] == 0.0) continue;
    const MultiIndex m = space_->exponent(i);
    const int j = space_->index(plus(m, Axis::t));
    if (j >= 0) r.c_[static_cast<std::size_t>(j)] = c_[i] / (m[0] + 1);
  }
  return r;
}

Series Series::compose(const std::function<double(int)>& derivs) const {
  Series delta = *this;
  delta.c_[0] = 0.0;
  Series result = constant(space_, derivs(0));
  Series power = constant(space_, 1.0);
  double fact = 1.0;
  for (int k = 1; k <= space_->max_weight(); ++k) {
    power = power * delta;
    fact *= k;
    result += power.scaled(derivs(k) / fact);
  }
  return result;
}

Series eval_series(const Expr& e, const std::function<Series(const Atom&)>& atom_series,
                   std::shared_ptr<const SeriesSpace> space) {
  std::map<Atom, Series> cache;
  Series sum(space);
  for (const auto& [m, c] : e.terms()) {
    Series t = Series::constant(space, c.get_d());
    for (const auto& [a, k] : m.factors()) {
      auto it = cache.find(a);
      if (it == cache.end()) it = cache.emplace(a, atom_series(a)).first;
      for (int i = 0; i < k; ++i) t = t * it->second;
    }
    sum += t;
  }
  return sum;
}

}  // namespace clf
