#pragma once
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "constructions.hpp"
#include "evalkit.hpp"

namespace dyf {

inline constexpr int kSchemaVersion = 1;

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Writes through a temporary file in the same directory, then renames.
void write_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);  // throws IoError

nlohmann::ordered_json weights_to_json(const BuiltNetwork& n);
BuiltNetwork weights_from_json(const nlohmann::json& j);  // throws SchemaError
void save_weights(const std::string& path, const BuiltNetwork& n);
BuiltNetwork load_weights(const std::string& path);  // IoError or SchemaError

nlohmann::ordered_json gen_params_to_json(const GenParams& g);
GenParams gen_params_from_json(const nlohmann::json& j, int k);
// A bare array is pi; an object may carry "pi" and "pibar".
void read_pi_file(const std::string& path, int k, Vec& pi, Vec& pibar);

// One {"tokens": [...], "truncated": bool} object per line.
std::string dataset_to_jsonl(const Alphabet& A, const Dataset& d);
Dataset dataset_from_jsonl(const Alphabet& A, const std::string& text);  // throws SchemaError with a line number
void save_dataset(const std::string& path, const Alphabet& A, const Dataset& d);
Dataset load_dataset(const std::string& path, const Alphabet& A);

// {"task", "k", "splits": {"id", "ood"}, "params"}
nlohmann::ordered_json metrics_json(const std::string& task, int k, nlohmann::ordered_json id, nlohmann::ordered_json ood,
                                    nlohmann::ordered_json params);
void save_metrics(const std::string& path, const nlohmann::ordered_json& m);

}  // namespace dyf
