// Copyright 2026 The tokenecon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TOKENECON_ACCOUNTING_HPP_
#define TOKENECON_ACCOUNTING_HPP_

// Hash-chained per-class token ledger.
//
// Canonical record (all integers big-endian):
//   u64 sequence | u64 step | u8 class | u64 count | i64 cost_micros |
//   u32 policy_id length | policy_id bytes | 32-byte prev_digest
// digest = SHA-256(canonical record). The genesis prev_digest is all zeros.

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tokenecon/core.hpp"

namespace tokenecon {

using Digest = std::array<std::uint8_t, 32>;

inline constexpr std::int64_t kCostScale = 1'000'000;  // costs are hashed as micro-units

inline Digest sha256(const std::vector<std::uint8_t>& bytes) {
  Digest d{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), d.data(), &len, EVP_sha256(), nullptr) != 1 || len != d.size()) {
    throw Error("sha256 failed");
  }
  return d;
}

inline std::string to_hex(const Digest& d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t b : d) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xf]);
  }
  return s;
}

inline std::int64_t to_cost_micros(double cost) {
  if (!std::isfinite(cost)) throw Error("ledger: non-finite cost");
  return static_cast<std::int64_t>(std::llround(cost * static_cast<double>(kCostScale)));
}

struct LedgerEntry {
  std::uint64_t sequence = 0;
  std::uint64_t step = 0;
  TokenClass token_class = TokenClass::kInput;
  std::uint64_t count = 0;
  std::int64_t cost_micros = 0;
  std::string policy_id;
  Digest prev_digest{};
  Digest digest{};

  double cost() const { return static_cast<double>(cost_micros) / static_cast<double>(kCostScale); }
  bool operator==(const LedgerEntry&) const = default;
};

namespace detail {

inline void put_be(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_be(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | p[i];
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> canonical_bytes(const LedgerEntry& e) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + 8 + 1 + 8 + 8 + 4 + e.policy_id.size() + 32);
  detail::put_be(out, e.sequence, 8);
  detail::put_be(out, e.step, 8);
  detail::put_be(out, static_cast<std::uint8_t>(e.token_class), 1);
  detail::put_be(out, e.count, 8);
  detail::put_be(out, static_cast<std::uint64_t>(e.cost_micros), 8);
  detail::put_be(out, e.policy_id.size(), 4);
  out.insert(out.end(), e.policy_id.begin(), e.policy_id.end());
  out.insert(out.end(), e.prev_digest.begin(), e.prev_digest.end());
  return out;
}

inline Digest entry_digest(const LedgerEntry& e) { return sha256(canonical_bytes(e)); }

class Ledger {
 public:
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  std::vector<LedgerEntry>& mutable_entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  Digest head() const { return entries_.empty() ? Digest{} : entries_.back().digest; }

  const LedgerEntry& record(std::uint64_t step, TokenClass cls, std::uint64_t count, double cost,
                            const std::string& policy_id) {
    LedgerEntry e;
    e.sequence = entries_.size();
    e.step = step;
    e.token_class = cls;
    e.count = count;
    e.cost_micros = to_cost_micros(cost);
    e.policy_id = policy_id;
    e.prev_digest = head();
    e.digest = entry_digest(e);
    entries_.push_back(std::move(e));
    return entries_.back();
  }

 private:
  std::vector<LedgerEntry> entries_;
};

// nullopt if the chain verifies, else the first sequence number that fails.
inline std::optional<std::uint64_t> verify_chain(const Ledger& ledger) {
  Digest prev{};
  const auto& es = ledger.entries();
  for (std::size_t i = 0; i < es.size(); ++i) {
    const LedgerEntry& e = es[i];
    if (e.sequence != i || e.prev_digest != prev || entry_digest(e) != e.digest ||
        static_cast<std::uint8_t>(e.token_class) >= kNumTokenClasses) {
      return i;
    }
    prev = e.digest;
  }
  return std::nullopt;
}

inline double verification_overhead(double c_ver, double c_inf) {
  if (!(c_inf > 0.0)) throw Error("verification_overhead: base inference cost must be > 0");
  return c_ver / c_inf;
}

struct ClassTotals {
  std::uint64_t count = 0;
  double cost = 0.0;

  bool operator==(const ClassTotals&) const = default;
};

inline std::map<TokenClass, ClassTotals> summarize_by_class(const Ledger& ledger) {
  std::map<TokenClass, ClassTotals> out;
  std::map<TokenClass, std::int64_t> micros;
  for (TokenClass c : kAllTokenClasses) {
    out[c] = {};
    micros[c] = 0;
  }
  for (const LedgerEntry& e : ledger.entries()) {
    out[e.token_class].count += e.count;
    micros[e.token_class] += e.cost_micros;
  }
  for (TokenClass c : kAllTokenClasses) {
    out[c].cost = static_cast<double>(micros[c]) / static_cast<double>(kCostScale);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files: "TELG" magic, u32 version, then u32-length-prefixed records of
// canonical bytes followed by the 32-byte digest.

inline constexpr std::uint32_t kLedgerFileVersion = 1;

inline std::vector<std::uint8_t> serialize_ledger(const Ledger& ledger) {
  std::vector<std::uint8_t> out = {'T', 'E', 'L', 'G'};
  detail::put_be(out, kLedgerFileVersion, 4);
  for (const LedgerEntry& e : ledger.entries()) {
    std::vector<std::uint8_t> rec = canonical_bytes(e);
    rec.insert(rec.end(), e.digest.begin(), e.digest.end());
    detail::put_be(out, rec.size(), 4);
    out.insert(out.end(), rec.begin(), rec.end());
  }
  return out;
}

inline Ledger parse_ledger(const std::vector<std::uint8_t>& bytes) {
  auto need = [&](std::size_t at, std::size_t n) {
    if (at + n > bytes.size()) throw Error("ledger file truncated at byte " + std::to_string(at));
  };
  need(0, 8);
  if (std::memcmp(bytes.data(), "TELG", 4) != 0) throw Error("ledger file: bad magic");
  if (detail::get_be(bytes.data() + 4, 4) != kLedgerFileVersion) throw Error("ledger file: unsupported version");
  Ledger ledger;
  std::size_t at = 8;
  while (at < bytes.size()) {
    need(at, 4);
    const std::size_t len = detail::get_be(bytes.data() + at, 4);
    at += 4;
    need(at, len);
    const std::uint8_t* p = bytes.data() + at;
    constexpr std::size_t kFixed = 8 + 8 + 1 + 8 + 8 + 4;
    if (len < kFixed + 64) throw Error("ledger file: record too short");
    LedgerEntry e;
    e.sequence = detail::get_be(p, 8);
    e.step = detail::get_be(p + 8, 8);
    e.token_class = static_cast<TokenClass>(p[16]);
    e.count = detail::get_be(p + 17, 8);
    e.cost_micros = static_cast<std::int64_t>(detail::get_be(p + 25, 8));
    const std::size_t plen = detail::get_be(p + 33, 4);
    if (len != kFixed + plen + 64) throw Error("ledger file: record length mismatch");
    e.policy_id.assign(reinterpret_cast<const char*>(p + kFixed), plen);
    std::memcpy(e.prev_digest.data(), p + kFixed + plen, 32);
    std::memcpy(e.digest.data(), p + kFixed + plen + 32, 32);
    ledger.mutable_entries().push_back(std::move(e));
    at += len;
  }
  return ledger;
}

inline void write_ledger_file(const Ledger& ledger, const std::string& path) {
  const auto bytes = serialize_ledger(ledger);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Ledger read_ledger_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open ledger file " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_ledger(bytes);
}

inline std::string ledger_text(const Ledger& ledger) {
  std::ostringstream os;
  os << "# sequence step class count cost_micros policy_id prev_digest digest\n";
  for (const LedgerEntry& e : ledger.entries()) {
    const auto cls = static_cast<std::uint8_t>(e.token_class);
    os << e.sequence << ' ' << e.step << ' '
       << (cls < kNumTokenClasses ? std::string(to_string(e.token_class)) : "invalid") << ' ' << e.count << ' '
       << e.cost_micros << ' ' << e.policy_id << ' ' << to_hex(e.prev_digest) << ' ' << to_hex(e.digest) << '\n';
  }
  return os.str();
}

}  // namespace tokenecon

#endif  // TOKENECON_ACCOUNTING_HPP_
