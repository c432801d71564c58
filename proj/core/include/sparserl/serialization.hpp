#pragma once

#include "sparserl/batch_data.hpp"
#include "sparserl/diagnostics.hpp"
#include "sparserl/fqi.hpp"
#include "sparserl/generator.hpp"
#include "sparserl/hard_instance.hpp"
#include "sparserl/mdp.hpp"
#include "sparserl/ope.hpp"

#include <filesystem>
#include <string>

namespace sparserl {

// Documents are JSON. Doubles are written in shortest round-trip form, so
// reading a document back and writing it again reproduces it byte for byte.

std::string mdp_to_json(const SparseLinearMDP& mdp);
SparseLinearMDP mdp_from_json(const std::string& text);

std::string policy_to_json(const Policy& pi);
Policy policy_from_json(const std::string& text);

std::string initial_to_json(const InitialDistribution& xi);
InitialDistribution initial_from_json(const std::string& text);

std::string generator_spec_to_json(const GeneratorSpec& spec);

/// CSV with header episode,step,x,a,x_next.
std::string dataset_to_csv(const BatchDataset& data);
std::string dataset_meta_to_json(const DatasetMeta& meta);
BatchDataset dataset_from_csv(const std::string& csv, const std::string& meta_json);

std::string ope_result_to_json(const OpeResult& result);
std::string fqi_result_to_json(const FqiResult& result);
std::string mismatch_report_to_json(const MismatchReport& report);
MismatchReport mismatch_report_from_json(const std::string& text);
std::string hard_params_to_json(const HardInstanceParams& params);
HardInstanceParams hard_params_from_json(const std::string& text);
std::string anatomy_report_to_json(const AnatomyReport& report);

/// Shortest decimal string that parses back to exactly x.
std::string format_double(double x);

/// Throws std::runtime_error naming the path when the file cannot be read or written.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

/// Dataset files: <stem>.csv plus <stem>.meta.json beside it.
void save_dataset(const BatchDataset& data, const std::filesystem::path& csv_path);
BatchDataset load_dataset(const std::filesystem::path& csv_path);
std::filesystem::path meta_path_for(const std::filesystem::path& csv_path);

}  // namespace sparserl
