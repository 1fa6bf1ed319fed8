#include "emo/stamp.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>

#include "emo/error.hpp"

namespace emo {

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
    throw InvalidInput("SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::string make_stamp(const KeyValueConfig& resolved, const std::string& command) {
  const std::string body = resolved.to_string();
  std::string out;
  out += "# config_sha256 = " + sha256_hex(body) + "\n";
  out += "# version = " + std::string(kVersion) + "\n";
  out += "# command = " + command + "\n";
  out += body;
  return out;
}

void write_stamp(const std::string& path, const KeyValueConfig& resolved,
                 const std::string& command) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingData("cannot write stamp " + path);
  out << make_stamp(resolved, command);
}

}  // namespace emo
