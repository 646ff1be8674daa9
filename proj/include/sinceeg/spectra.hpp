#pragma once

#include "sinceeg/sincconv.hpp"
#include "sinceeg/tensor.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sinceeg {

// Mean over filters of |H(f)|^2 on bins 0..n_fft/2.
Eigen::VectorXd filter_psd(const RowMatrixXd& kernels, Index n_fft);
inline Eigen::VectorXd filter_psd(const Filterbank& bank, Index n_fft) { return filter_psd(bank.kernels(), n_fft); }

// Trapezoidal integral of the piecewise-linear PSD over [f_lo, f_hi].
double band_power(const Eigen::VectorXd& freq, const Eigen::VectorXd& psd, double f_lo, double f_hi);

struct NamedBand {
  std::string name;
  double lo_hz;
  double hi_hz;
};

// "9-13,13-30" -> {"9-13", 9, 13}, {"13-30", 13, 30}
std::vector<NamedBand> parse_bands(const std::string& text);

struct AnovaResult {
  double f = 0.0;
  int df1 = 1;
  int df2 = 0;
  double p = 1.0;
};

// Two-group one-way ANOVA.
AnovaResult anova_oneway(std::span<const double> group_a, std::span<const double> group_b);

// I_x(a, b) by Lentz continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// P(F > f) for F ~ F(d1, d2).
double f_survival(double f, double d1, double d2);

// Step-down Holm: reject p_(i) while p_(i) <= alpha / (m - i + 1).
std::vector<bool> holm_correction(std::span<const double> p_values, double alpha = 0.05);

struct BandTestResult {
  NamedBand band;
  double mean_a = 0.0;
  double mean_b = 0.0;
  AnovaResult anova;
  bool holm_reject = false;
};

struct PsdReport {
  Eigen::VectorXd freq_grid;
  std::vector<Eigen::VectorXd> unit_psd_a;  // one per statistical unit
  std::vector<Eigen::VectorXd> unit_psd_b;
  Eigen::VectorXd mean_psd_a;
  Eigen::VectorXd mean_psd_b;
  Eigen::MatrixXd band_powers_a;  // units x bands
  Eigen::MatrixXd band_powers_b;
};

struct CohortComparison {
  std::vector<BandTestResult> tests;
  PsdReport report;
};

// Each unit is one PSD curve on freq_grid (e.g. a participant's fold-averaged
// filterbank PSD).
CohortComparison cohort_compare(const Eigen::VectorXd& freq_grid, const std::vector<Eigen::VectorXd>& units_a,
                                const std::vector<Eigen::VectorXd>& units_b, const std::vector<NamedBand>& bands,
                                double alpha = 0.05);

// One unit per Filterbank.
CohortComparison cohort_compare(const std::vector<Filterbank>& models_a, const std::vector<Filterbank>& models_b,
                                const std::vector<NamedBand>& bands, Index n_fft = 4096, double alpha = 0.05);

// freq,psd_cohortA,psd_cohortB
void write_psd_csv(const std::filesystem::path& path, const PsdReport& report);
// band,F,df1,df2,p,holm_reject
void write_band_tests_csv(const std::filesystem::path& path, const std::vector<BandTestResult>& tests);
// Line plot of the two cohort-mean curves up to max_hz.
void write_psd_svg(const std::filesystem::path& path, const PsdReport& report, const std::string& label_a,
                   const std::string& label_b, double max_hz = 60.0);

}  // namespace sinceeg
