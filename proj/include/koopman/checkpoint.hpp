#pragma once

#include "koopman/statepred.hpp"
#include "koopman/trajpred.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace koopman::checkpoint {

inline constexpr int kSchemaVersion = 1;

// JSON envelope with base64-wrapped little-endian float64 payloads: metadata
// stays readable, weights stay bit-exact. Loading a checkpoint and predicting
// reproduces the in-memory predictions bit for bit.

std::string encode_base64(const double* data, size_t count);
std::vector<double> decode_base64(const std::string& text);

void save_statepred(const std::filesystem::path& path, const statepred::StatePred& model,
                    const nlohmann::json& config_echo);
void save_trajpred(const std::filesystem::path& path, const trajpred::TrajPred& model,
                   const nlohmann::json& config_echo);

struct Loaded {
    std::string kind; // "statepred" | "trajpred"
    nlohmann::json config;
    std::optional<statepred::StatePred> statepred;
    std::optional<trajpred::TrajPred> trajpred;
};

/// Rejects unknown schema versions and malformed payloads.
Loaded load(const std::filesystem::path& path);

} // namespace koopman::checkpoint
