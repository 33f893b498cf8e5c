#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "toad/dataset.hpp"
#include "toad/model.hpp"

namespace toad::testing {

std::string data_path(const std::string& file);

struct NamedDataset {
    std::string name;
    Dataset data;
};

/// Every CSV in the data directory with its task.
std::vector<NamedDataset> load_corpus();
Dataset load_named(const std::string& name);

/// Two trees over four inputs (three used): input 0 with integer 2-bit
/// thresholds {2, 3}, input 1 with 1-bit thresholds {0, 1}, input 3 with a
/// single half-precision threshold. Leaf value 3 is shared by both trees.
Ensemble sample_ensemble();
/// The expected encoding of sample_ensemble, assembled by hand as a string
/// of '0' and '1' characters including section padding.
std::string sample_bitstring();
std::vector<std::uint8_t> bits_to_bytes(const std::string& bits);

/// Random valid ensemble covering every width exponent, both numeric types
/// and all three task kinds.
Ensemble random_ensemble(std::mt19937_64& rng);
/// Inputs that land on, just below and just above every stored threshold.
std::vector<std::vector<double>> probe_inputs(const Ensemble& e, std::mt19937_64& rng, std::size_t extra = 16);

}  // namespace toad::testing
