#pragma once

#include <vector>

namespace fkdl {

// Upper tail P(X >= stat) for a chi-square law with df degrees of freedom.
double chi_square_sf(double stat, int df);

struct ChiSquare {
    double stat = 0;
    int df = 0;
    double p_value = 1;
};

// Pearson goodness-of-fit. Cells with expected count below min_expected are
// pooled into one cell.
ChiSquare chi_square_gof(const std::vector<double>& counts, const std::vector<double>& probs,
                         double min_expected = 5.0);

struct MannWhitney {
    double u = 0;
    double z = 0;
    double p_two_sided = 1;
    double p_greater = 1;  // alternative: first sample stochastically larger
};

// Normal approximation with tie correction.
MannWhitney mann_whitney(const std::vector<double>& a, const std::vector<double>& b);

double normal_sf(double z);
double median(std::vector<double> v);
// Linear interpolation between order statistics.
double quantile(std::vector<double> v, double p);
double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v);  // unbiased

}  // namespace fkdl
