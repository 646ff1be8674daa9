#include "sinceeg/spectra.hpp"

#include "sinceeg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sinceeg {

Eigen::VectorXd filter_psd(const RowMatrixXd& kernels, Index n_fft) {
  if (kernels.rows() < 1) throw std::invalid_argument("filter_psd: empty filterbank");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_fft / 2 + 1);
  for (Index i = 0; i < kernels.rows(); ++i) {
    acc += frequency_response(kernels.row(i).transpose(), n_fft).array().square().matrix();
  }
  return acc / static_cast<double>(kernels.rows());
}

double band_power(const Eigen::VectorXd& freq, const Eigen::VectorXd& psd, double f_lo, double f_hi) {
  if (freq.size() != psd.size() || freq.size() < 2) throw std::invalid_argument("band_power: grid/psd size mismatch");
  if (!(f_lo < f_hi)) throw std::invalid_argument("band_power: f_lo must be below f_hi");
  if (f_lo < freq[0] || f_hi > freq[freq.size() - 1]) throw std::invalid_argument("band_power: band outside the grid");

  auto value_at = [&](double f) {
    const auto it = std::upper_bound(freq.data(), freq.data() + freq.size(), f);
    const Index hi = std::clamp<Index>(it - freq.data(), 1, freq.size() - 1);
    const Index lo = hi - 1;
    const double t = (f - freq[lo]) / (freq[hi] - freq[lo]);
    return psd[lo] + t * (psd[hi] - psd[lo]);
  };

  double area = 0.0;
  double prev_f = f_lo;
  double prev_v = value_at(f_lo);
  for (Index i = 0; i < freq.size(); ++i) {
    if (freq[i] <= f_lo) continue;
    if (freq[i] >= f_hi) break;
    area += 0.5 * (prev_v + psd[i]) * (freq[i] - prev_f);
    prev_f = freq[i];
    prev_v = psd[i];
  }
  area += 0.5 * (prev_v + value_at(f_hi)) * (f_hi - prev_f);
  return area;
}

std::vector<NamedBand> parse_bands(const std::string& text) {
  std::vector<NamedBand> bands;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-');
    if (dash == std::string::npos || dash == 0) throw std::invalid_argument("expected lo-hi band, got '" + item + "'");
    const double lo = std::stod(item.substr(0, dash));
    const double hi = std::stod(item.substr(dash + 1));
    if (!(lo >= 0.0 && lo < hi)) throw std::invalid_argument("band '" + item + "' must satisfy 0 <= lo < hi");
    bands.push_back({item, lo, hi});
  }
  if (bands.empty()) throw std::invalid_argument("no bands given");
  return bands;
}

AnovaResult anova_oneway(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("anova_oneway: each group needs at least 2 values");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / na;
  const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / nb;
  const double grand = (na * mean_a + nb * mean_b) / (na + nb);
  double ss_within = 0.0;
  for (double x : a) ss_within += (x - mean_a) * (x - mean_a);
  for (double x : b) ss_within += (x - mean_b) * (x - mean_b);
  const double ss_between = na * (mean_a - grand) * (mean_a - grand) + nb * (mean_b - grand) * (mean_b - grand);

  AnovaResult r;
  r.df1 = 1;
  r.df2 = static_cast<int>(a.size() + b.size()) - 2;
  if (ss_between == 0.0) {
    r.f = 0.0;
    r.p = 1.0;
  } else if (ss_within == 0.0) {
    r.f = std::numeric_limits<double>::infinity();
    r.p = 0.0;
  } else {
    r.f = ss_between / (ss_within / r.df2);
    r.p = f_survival(r.f, r.df1, r.df2);
  }
  return r;
}

namespace {

// Continued fraction for I_x(a,b), modified Lentz.
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("regularized_incomplete_beta: continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("incomplete beta: x must be in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double f_survival(double f, double d1, double d2) {
  if (!(d1 > 0.0 && d2 > 0.0)) throw std::invalid_argument("f_survival: degrees of freedom must be positive");
  if (std::isinf(f)) return 0.0;
  if (f <= 0.0) return 1.0;
  return regularized_incomplete_beta(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f));
}

std::vector<bool> holm_correction(std::span<const double> p_values, double alpha) {
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("holm_correction: p-values must lie in [0, 1]");
  }
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
  std::vector<bool> reject(m, false);
  for (std::size_t rank = 0; rank < m; ++rank) {
    const std::size_t idx = order[rank];
    if (p_values[idx] > alpha / static_cast<double>(m - rank)) break;
    reject[idx] = true;
  }
  return reject;
}

CohortComparison cohort_compare(const Eigen::VectorXd& freq_grid, const std::vector<Eigen::VectorXd>& units_a,
                                const std::vector<Eigen::VectorXd>& units_b, const std::vector<NamedBand>& bands,
                                double alpha) {
  if (units_a.size() < 2 || units_b.size() < 2) throw std::invalid_argument("cohort_compare: need >= 2 models per cohort");
  if (bands.empty()) throw std::invalid_argument("cohort_compare: no bands");
  for (const auto* units : {&units_a, &units_b}) {
    for (const auto& u : *units) {
      if (u.size() != freq_grid.size()) throw std::invalid_argument("cohort_compare: PSD length does not match grid");
    }
  }

  CohortComparison out;
  PsdReport& r = out.report;
  r.freq_grid = freq_grid;
  r.unit_psd_a = units_a;
  r.unit_psd_b = units_b;
  r.mean_psd_a = Eigen::VectorXd::Zero(freq_grid.size());
  r.mean_psd_b = Eigen::VectorXd::Zero(freq_grid.size());
  for (const auto& u : units_a) r.mean_psd_a += u / static_cast<double>(units_a.size());
  for (const auto& u : units_b) r.mean_psd_b += u / static_cast<double>(units_b.size());

  const auto n_bands = static_cast<Index>(bands.size());
  r.band_powers_a.resize(static_cast<Index>(units_a.size()), n_bands);
  r.band_powers_b.resize(static_cast<Index>(units_b.size()), n_bands);
  std::vector<double> p_values;
  for (Index k = 0; k < n_bands; ++k) {
    const NamedBand& band = bands[static_cast<std::size_t>(k)];
    std::vector<double> a, b;
    for (std::size_t i = 0; i < units_a.size(); ++i) {
      a.push_back(band_power(freq_grid, units_a[i], band.lo_hz, band.hi_hz));
      r.band_powers_a(static_cast<Index>(i), k) = a.back();
    }
    for (std::size_t i = 0; i < units_b.size(); ++i) {
      b.push_back(band_power(freq_grid, units_b[i], band.lo_hz, band.hi_hz));
      r.band_powers_b(static_cast<Index>(i), k) = b.back();
    }
    BandTestResult t;
    t.band = band;
    t.mean_a = r.band_powers_a.col(k).mean();
    t.mean_b = r.band_powers_b.col(k).mean();
    t.anova = anova_oneway(a, b);
    p_values.push_back(t.anova.p);
    out.tests.push_back(t);
  }
  const std::vector<bool> reject = holm_correction(p_values, alpha);
  for (std::size_t k = 0; k < out.tests.size(); ++k) out.tests[k].holm_reject = reject[k];
  return out;
}

CohortComparison cohort_compare(const std::vector<Filterbank>& models_a, const std::vector<Filterbank>& models_b,
                                const std::vector<NamedBand>& bands, Index n_fft, double alpha) {
  if (models_a.size() < 2 || models_b.size() < 2) throw std::invalid_argument("cohort_compare: need >= 2 models per cohort");
  const double sr = models_a.front().sample_rate();
  std::vector<Eigen::VectorXd> a, b;
  for (const auto& m : models_a) a.push_back(filter_psd(m, n_fft));
  for (const auto& m : models_b) {
    if (m.sample_rate() != sr) throw std::invalid_argument("cohort_compare: models disagree on sample rate");
    b.push_back(filter_psd(m, n_fft));
  }
  return cohort_compare(frequency_grid(n_fft, sr), a, b, bands, alpha);
}

void write_psd_csv(const std::filesystem::path& path, const PsdReport& report) {
  std::ofstream out(path);
  if (!out) throw FormatError(FormatErrc::io_error, "cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "freq,psd_cohortA,psd_cohortB\n";
  for (Index i = 0; i < report.freq_grid.size(); ++i) {
    out << report.freq_grid[i] << ',' << report.mean_psd_a[i] << ',' << report.mean_psd_b[i] << '\n';
  }
}

void write_band_tests_csv(const std::filesystem::path& path, const std::vector<BandTestResult>& tests) {
  std::ofstream out(path);
  if (!out) throw FormatError(FormatErrc::io_error, "cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "band,F,df1,df2,p,holm_reject\n";
  for (const auto& t : tests) {
    out << t.band.name << ',' << t.anova.f << ',' << t.anova.df1 << ',' << t.anova.df2 << ',' << t.anova.p << ','
        << (t.holm_reject ? 1 : 0) << '\n';
  }
}

void write_psd_svg(const std::filesystem::path& path, const PsdReport& report, const std::string& label_a,
                   const std::string& label_b, double max_hz) {
  std::ofstream out(path);
  if (!out) throw FormatError(FormatErrc::io_error, "cannot open " + path.string() + " for writing");
  constexpr double W = 640, H = 360, L = 60, R = 20, T = 20, B = 40;
  const Index n = std::max<Index>(2, std::upper_bound(report.freq_grid.data(), report.freq_grid.data() + report.freq_grid.size(),
                                                      max_hz) - report.freq_grid.data());
  const double x_max = report.freq_grid[n - 1];
  const double y_max =
      std::max({report.mean_psd_a.head(n).maxCoeff(), report.mean_psd_b.head(n).maxCoeff(), 1e-12});
  auto polyline = [&](const Eigen::VectorXd& y, const char* color) {
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (Index i = 0; i < n; ++i) {
      out << L + (W - L - R) * report.freq_grid[i] / x_max << ',' << H - B - (H - T - B) * y[i] / y_max << ' ';
    }
    out << "\"/>\n";
  };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (double f = 0.0; f <= x_max; f += 10.0) {
    const double x = L + (W - L - R) * f / x_max;
    out << "<text x=\"" << x << "\" y=\"" << H - B + 16 << "\" font-size=\"11\" text-anchor=\"middle\">" << f << "</text>\n";
  }
  out << "<text x=\"" << (W + L) / 2 << "\" y=\"" << H - 6 << "\" font-size=\"12\" text-anchor=\"middle\">Hz</text>\n";
  out << "<text x=\"14\" y=\"" << H / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14," << H / 2
      << ")\" text-anchor=\"middle\">cumulative PSD</text>\n";
  polyline(report.mean_psd_a, "#1f77b4");
  polyline(report.mean_psd_b, "#d62728");
  out << "<text x=\"" << W - R - 120 << "\" y=\"" << T + 14 << "\" font-size=\"12\" fill=\"#1f77b4\">" << label_a << "</text>\n";
  out << "<text x=\"" << W - R - 120 << "\" y=\"" << T + 30 << "\" font-size=\"12\" fill=\"#d62728\">" << label_b << "</text>\n";
  out << "</svg>\n";
}

}  // namespace sinceeg
