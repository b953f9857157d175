#include "runvar/fixtures.hpp"

#include <array>
#include <utility>

#include "runvar/error.hpp"

namespace runvar {

namespace {

// Per-cell ablation results; support columns hold the standard deviation of
// the support size.
constexpr std::string_view kAblation =
    R"(lambda,step,module,tv_answer,tv_finding,tv_citation,support_sd_finding,support_sd_citation,mean_findings,mean_citations,accuracy
0.5,1,Query,0.37,0.76,0.42,29.97,2.10,90.82,6.62,0.40
0.5,1,Sum,0.58,0.84,0.52,32.01,2.17,90.84,6.46,0.40
0.5,1,Update,0.59,0.85,0.55,31.45,2.49,88.80,6.96,0.52
0.5,2,Query,0.36,0.70,0.30,27.35,2.30,92.46,5.96,0.46
0.5,2,Sum,0.36,0.65,0.38,30.85,2.60,88.14,6.48,0.44
0.5,2,Update,0.38,0.82,0.40,28.68,2.48,96.58,6.40,0.40
0.5,3,Query,0.36,0.61,0.30,32.08,2.26,86.92,6.08,0.34
0.5,3,Sum,0.28,0.52,0.28,31.88,2.14,96.82,6.84,0.34
0.5,3,Update,0.32,0.68,0.34,32.62,2.67,89.96,6.32,0.44
0.5,Combined,Query,0.44,0.76,0.50,35.84,2.41,102.90,6.52,0.40
0.5,Combined,Sum,0.59,0.84,0.55,34.46,2.76,89.52,6.96,0.44
0.5,Combined,Update,0.59,0.89,0.55,39.17,2.55,96.88,7.62,0.41
1.0,1,Query,0.51,0.80,0.46,25.98,2.71,91.38,6.12,0.36
1.0,1,Sum,0.53,0.88,0.51,38.32,2.51,88.46,6.60,0.46
1.0,1,Update,0.62,0.89,0.59,28.22,2.48,88.10,6.70,0.46
1.0,2,Query,0.43,0.79,0.45,25.85,1.93,93.53,6.74,0.42
1.0,2,Sum,0.37,0.54,0.29,24.57,1.63,93.77,6.02,0.46
1.0,2,Update,0.40,0.85,0.48,28.48,2.14,84.60,6.62,0.40
1.0,3,Query,0.34,0.63,0.32,30.65,1.90,83.54,6.30,0.50
1.0,3,Sum,0.30,0.53,0.29,31.29,2.04,94.47,6.09,0.38
1.0,3,Update,0.41,0.63,0.38,37.55,2.68,101.00,6.70,0.40
1.0,Combined,Query,0.49,0.87,0.51,36.14,2.70,89.50,6.52,0.50
1.0,Combined,Sum,0.61,0.92,0.62,34.93,2.67,88.93,6.07,0.41
1.0,Combined,Update,0.59,0.88,0.58,39.49,2.30,88.74,6.00,0.56
)";

constexpr std::string_view kFindingsVsCitations =
    R"(metric,findings,citations
tv,0.76,0.44
)";

// published_avg_tv is carried for comparison; aggregate derives avg_tv itself.
constexpr std::string_view kMitigation =
    R"(method,accuracy,tv_answer,tv_finding,tv_citation,published_avg_tv
Baseline,0.24,0.62,0.83,0.62,0.69
Struc. Sum.,0.28,0.58,0.80,0.64,0.67
Struc. Update,0.32,0.52,0.75,0.58,0.62
Struc. Comb.,0.36,0.44,0.68,0.56,0.56
Quer. Int.,0.32,0.50,0.74,0.61,0.62
Comb.,0.36,0.38,0.61,0.43,0.47
)";

constexpr std::string_view kApiTemperature =
    R"(metric,T=0,lambda=0.5,lambda=1.0
tv_answer,0.700,0.670,0.620
tv_finding,0.828,0.836,0.834
tv_citation,0.621,0.608,0.612
accuracy,0.28,0.24,0.24
)";

constexpr std::string_view kTvVsAccuracy =
    R"(lambda,step,module,tv_finding,accuracy
0.5,Step 1,Query,0.76,0.40
1.0,Step 1,Query,0.80,0.36
0.5,Combined,Update,0.89,0.41
1.0,Combined,Update,0.88,0.56
0.5,Step 1,Sum,0.84,0.40
0.5,Step 3,Sum,0.52,0.34
)";

constexpr std::array<std::pair<std::string_view, std::string_view>, 5> kFixtures{{
    {"ablation", kAblation},
    {"findings_vs_citations", kFindingsVsCitations},
    {"mitigation", kMitigation},
    {"api_temperature", kApiTemperature},
    {"tv_vs_accuracy", kTvVsAccuracy},
}};

}  // namespace

std::vector<std::string> fixture_names() {
  std::vector<std::string> out;
  for (const auto& [name, csv] : kFixtures) out.emplace_back(name);
  return out;
}

std::string_view fixture_csv(std::string_view name) {
  for (const auto& [n, csv] : kFixtures) {
    if (n == name) return csv;
  }
  std::string valid;
  for (const auto& [n, csv] : kFixtures) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw ConfigError("fixture", "unknown fixture '" + std::string(name) + "'; valid fixtures are " + valid);
}

}  // namespace runvar
