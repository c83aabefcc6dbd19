#include "spiralir/nn.hpp"

#include <cblas.h>

#include <mutex>
#include <stdexcept>

extern "C" void openblas_set_num_threads(int);

namespace spiralir::nn {

namespace detail {

namespace {

// All parallelism lives at the frame level; a threaded BLAS underneath would
// oversubscribe the cores and break run-to-run determinism.
std::once_flag blas_once;
void pin_blas() {
  std::call_once(blas_once, [] { openblas_set_num_threads(1); });
}

}  // namespace

void gemm_rm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
             int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  pin_blas();
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm_rm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
             int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  pin_blas();
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace detail

std::string op_name(Op op) {
  switch (op) {
    case Op::Dense: return "dense";
    case Op::Conv3x3: return "conv3x3";
    case Op::Upsample2: return "upsample2";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Relu: return "relu";
    case Op::Tanh: return "tanh";
  }
  throw std::logic_error("op_name: unknown op");
}

Op op_from_name(const std::string& name) {
  if (name == "dense") return Op::Dense;
  if (name == "conv3x3") return Op::Conv3x3;
  if (name == "upsample2") return Op::Upsample2;
  if (name == "leaky_relu") return Op::LeakyRelu;
  if (name == "relu") return Op::Relu;
  if (name == "tanh") return Op::Tanh;
  throw std::invalid_argument("op_from_name: unknown op '" + name + "'");
}

}  // namespace spiralir::nn
