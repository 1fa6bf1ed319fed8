#pragma once

#include <string>

#include "emo/config.hpp"

namespace emo {

constexpr const char* kVersion = "0.1.0";

// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);

// A stamp is itself a loadable config: comment lines carrying the hash of the
// resolved configuration, the tool version and the command, followed by the
// resolved keys (seed included). Loading it and re-running the command
// reproduces the run.
std::string make_stamp(const KeyValueConfig& resolved, const std::string& command);
void write_stamp(const std::string& path, const KeyValueConfig& resolved,
                 const std::string& command);

}  // namespace emo
