#pragma once

#include <string>
#include <vector>

#include "microloc/quantize.hpp"

namespace microloc {

struct AdmissiblePair {
    double eps1 = 0.1;
    double eps2 = 0.5;

    AdmissiblePair() = default;
    AdmissiblePair(double e1, double e2);
    // even, homogeneous of degree 0; 1 for |theta| <= eps1|eta|, 0 for |theta| >= eps2|eta|
    double chi(double theta, double eta) const;
    // 0 for |eta| <= 1/2, 1 for |eta| >= 1
    double pi(double eta) const;
};

// x -> f at the nearest grid point; exact on grid samples
Symbol field_symbol(const Field& f);

enum class ParadiffPath { automatic, generic, separable };

Field paradiff_apply(const Symbol& a, const Field& u, const AdmissiblePair& adm = {},
                     ParadiffPath path = ParadiffPath::automatic);

int neighbour_width(int J);
// psi~_j = sum over |j-k| <= width of psi_k
rvec widened_piece(const DyadicPartition& part, int j, int width);
// sum_j psi~_j T_{psi_j a} psi~_j u; width < 0 selects neighbour_width(J).
// rings with psi~_j u == 0 are skipped; the number of contributing rings is returned through `used`.
Field dyadic_paradiff_apply(const Symbol& a, const Field& u, const DyadicPartition& part,
                            const AdmissiblePair& adm = {}, int width = -1, int* used = nullptr);

struct RemainderRow {
    std::string label;
    double s = 0;
    double norm = 0;
    int resolution = 0;
};

struct RemainderResult {
    Field remainder;
    double order_gain = 0;
    std::vector<RemainderRow> rows;
};

double sobolev_norm(const Field& u, double s);
// slope of log ||f||_{H^s} against s
double sobolev_growth(const Field& f, const rvec& s_values);
rvec default_s_values();

RemainderResult paraproduct_remainder(const Field& a, const Field& b, const AdmissiblePair& adm = {},
                                      const rvec& s_values = default_s_values());
RemainderResult paralinearization_remainder(const std::function<double(double)>& F,
                                            const std::function<double(double)>& dF, const Field& u,
                                            const AdmissiblePair& adm = {},
                                            const rvec& s_values = default_s_values());

// H^s norms of R, T_a b and T_b a for samples of fa, fb at each resolution
std::vector<RemainderRow> paraproduct_refinement(const std::function<double(double)>& fa,
                                                 const std::function<double(double)>& fb, double L,
                                                 const std::vector<int>& ns, double s,
                                                 const AdmissiblePair& adm = {});

void write_remainder_csv(const std::string& path, const std::vector<RemainderRow>& rows);

}  // namespace microloc
