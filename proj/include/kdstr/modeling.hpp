#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kdstr/core.hpp"

namespace kdstr {

// Instances of one region (or one cluster), in canonical order.
struct FitInput {
  int num_predictors = 0;           // k: raw time then spatial coordinates
  int num_features = 0;
  std::vector<double> predictors;   // n x k
  std::vector<double> responses;    // n x |F|
  std::vector<double> bounds_lo;    // predictor extent used for standardization
  std::vector<double> bounds_hi;

  std::size_t size() const { return num_predictors ? predictors.size() / num_predictors : 0; }
  std::span<const double> predictor(std::size_t i) const {
    return {predictors.data() + i * num_predictors, static_cast<std::size_t>(num_predictors)};
  }
  std::span<const double> response(std::size_t i) const {
    return {responses.data() + i * num_features, static_cast<std::size_t>(num_features)};
  }
};

// Extent of a region block: raw times at its bounds and the bounding box of
// its outline (member sensor locations when no outline is available).
std::pair<std::vector<double>, std::vector<double>> region_bounds(const Dataset& d, const Region& r);

// `instances` must be ascending dataset indices.
FitInput make_fit_input(const Dataset& d, std::span<const std::int64_t> instances,
                        std::vector<double> bounds_lo, std::vector<double> bounds_hi);

// Concatenates inputs in the given order; bounds become the union.
FitInput concatenate(std::span<const FitInput> inputs);

Standardizer make_standardizer(std::span<const double> lo, std::span<const double> hi);

// Graded exponent lists (total degree <= degree) in `vars` variables; the
// list for degree d is a prefix of the list for degree d + 1.
std::vector<std::vector<int>> monomials(int vars, int degree);

ModelArtifact fit(Technique technique, const FitInput& input, int complexity);
ModelArtifact fit_cluster(Technique technique, std::span<const FitInput> inputs, int complexity);

// PLR and DTR evaluate anywhere; DCT needs the position of the query in the
// model's canonical sequence.
std::vector<double> predict(const ModelArtifact& m, std::span<const double> predictors,
                            std::optional<std::size_t> position = std::nullopt);

// Predictions for every instance of `input` (row-major n x |F|).
std::vector<double> predict_all(const ModelArtifact& m, const FitInput& input);

// Orthonormal DCT-II of a sequence, and the inverse of a sparse spectrum at
// one position.
std::vector<double> dct_ii(std::span<const double> x);
double idct_at(const DctSeries& series, std::size_t position);
// Every position of the truncated sequence at once.
std::vector<double> idct(const DctSeries& series);

}  // namespace kdstr
