#pragma once

#include <string>
#include <vector>

#include "tforge/types.hpp"

namespace tforge {

std::string sha256_hex(const std::string& bytes);

// Canonical JSONL rendering: one patient per line, UTF-8, LF endings,
// keys sorted, shortest round-trip float formatting. Hashing and
// byte-identity checks rely on this being the single source of bytes.
std::string cohort_to_jsonl(const Cohort& cohort);

void save_cohort(const Cohort& cohort, const std::string& path);

struct LoadWarning {
    std::string patient_id;
    std::string message;
};

// Parses, validates, and rebuilds the vocabulary. Malformed lines raise with
// the 1-based line number; invariant violations raise listing all of them.
// Post-onset events are accepted but reported through `warnings`.
Cohort load_cohort(const std::string& path,
                   std::vector<LoadWarning>* warnings = nullptr);

Cohort parse_cohort_jsonl(const std::string& text,
                          std::vector<LoadWarning>* warnings = nullptr);

std::string cohort_sha256(const Cohort& cohort);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace tforge
