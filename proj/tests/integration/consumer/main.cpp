#include <meshstyle/jacobian.hpp>
#include <meshstyle/mesh.hpp>
#include <meshstyle/sampling.hpp>

#include <cstdio>

int main() {
  const meshstyle::Mesh m = meshstyle::icosphere(2);
  const meshstyle::PoissonFactorization fact(m);
  const double err = (fact.solve(meshstyle::init_identity(m)) - m.vertices()).cwiseAbs().maxCoeff();
  std::printf("identity solve error %.3e\n", err);
  return err < 1e-8 ? 0 : 1;
}
