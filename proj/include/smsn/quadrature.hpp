#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace smsn {

struct quadrature_error : std::runtime_error {
  double achieved;
  quadrature_error(const std::string& msg, double err)
      : std::runtime_error(msg + " (achieved error " + std::to_string(err) + ")"),
        achieved(err) {}
};

namespace detail {

// Gauss 7 / Kronrod 15 nodes on [-1,1]: {abscissa, gauss weight, kronrod weight}
inline constexpr double g7k15_nodes[8][3] = {
    {0.000000000000000, 0.417959183673469, 0.209482141084728},
    {0.405845151377397, 0.381830050505119, 0.190350578064785},
    {0.741531185599394, 0.279705391489277, 0.140653259715525},
    {0.949107912342759, 0.129484966168870, 0.063092092629979},
    {0.207784955007898, 0.0,               0.204432940075298},
    {0.586087235467691, 0.0,               0.169004726639267},
    {0.864864423359769, 0.0,               0.104790010322250},
    {0.991455371120813, 0.0,               0.022935322010529}};

template <class F>
double g7k15(const F& f, double a, double b, double& err) {
  const double mid = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double y0 = f(mid);
  double g7 = g7k15_nodes[0][1] * y0;
  double k15 = g7k15_nodes[0][2] * y0;
  for (int i = 1; i < 8; ++i) {
    const double dx = h * g7k15_nodes[i][0];
    const double yi = f(mid + dx) + f(mid - dx);
    g7 += g7k15_nodes[i][1] * yi;
    k15 += g7k15_nodes[i][2] * yi;
  }
  g7 *= h;
  k15 *= h;
  err = std::pow(200.0 * std::fabs(k15 - g7), 1.5);
  return k15;
}

}  // namespace detail

// Adaptive G7K15 on [a,b], bisecting the worst interval until the summed
// error estimate meets abs_tol or rel_tol. Throws quadrature_error past
// max_subdiv intervals.
template <class F>
double integrate(const F& f, double a, double b, double abs_tol = 1e-10,
                 double rel_tol = 1e-10, int max_subdiv = 200) {
  struct Seg {
    double a, b, val, err;
  };
  Seg segs[256];
  int n = 0;
  double err0;
  double v0 = detail::g7k15(f, a, b, err0);
  segs[n++] = {a, b, v0, err0};
  if (max_subdiv > 255) max_subdiv = 255;
  while (true) {
    double total = 0.0, toterr = 0.0;
    int worst = 0;
    for (int i = 0; i < n; ++i) {
      total += segs[i].val;
      toterr += segs[i].err;
      if (segs[i].err > segs[worst].err) worst = i;
    }
    if (toterr <= abs_tol || toterr <= rel_tol * std::fabs(total)) return total;
    if (n >= max_subdiv)
      throw quadrature_error("adaptive quadrature failed to converge", toterr);
    Seg s = segs[worst];
    double m = 0.5 * (s.a + s.b);
    double e1, e2;
    double v1 = detail::g7k15(f, s.a, m, e1);
    double v2 = detail::g7k15(f, m, s.b, e2);
    segs[worst] = {s.a, m, v1, e1};
    segs[n++] = {m, s.b, v2, e2};
  }
}

}  // namespace smsn
