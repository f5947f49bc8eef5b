// Approximates v^T exp(A) v on a 2D Laplacian with the Q-less rational Lanczos
// method and prints the per-iteration estimates and residual bounds.

#include <iostream>

#include "ratlanczos/ratlanczos.hpp"

int main() {
  using namespace ratlanczos;
  const SparseSym a = laplacian2d(30);
  const Vector v = Vector::Ones(a.size()).normalized();

  FormRequest req;
  req.f = ScalarFunction::exp();
  req.tol = 1e-12;
  const FormResult r = bilinear_form(a, v, v, default_shifts(a), req);

  for (std::size_t j = 0; j < r.history.size(); ++j) {
    std::cout << j + 1 << "  " << r.history[j];
    if (j < r.bound_history.size()) std::cout << "  bound " << r.bound_history[j];
    std::cout << '\n';
  }
  std::cout << "value " << r.value << " after " << r.iterations << " iterations (" << to_string(r.termination)
            << ")\n";
}
