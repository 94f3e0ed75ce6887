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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "tokenecon/tokenecon.hpp"

namespace tokenecon {
namespace {

Ledger random_ledger(std::size_t n, std::uint64_t seed) {
  RngStream s = derive_rng_stream(seed, "ledger");
  Ledger l;
  for (std::size_t i = 0; i < n; ++i) {
    l.record(i / 3, kAllTokenClasses[s.below(kNumTokenClasses)], s.below(100), s.uniform(0, 50),
             "greedy/oracle/value_aware");
  }
  return l;
}

TEST(Sha256Test, KnownVector) {
  const std::string abc = "abc";
  EXPECT_EQ(to_hex(sha256(std::vector<std::uint8_t>(abc.begin(), abc.end()))),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(LedgerTest, GenesisEntry) {
  Ledger l;
  const LedgerEntry& e = l.record(0, TokenClass::kInput, 10, 1.5, "p");
  EXPECT_EQ(e.sequence, 0u);
  EXPECT_EQ(e.prev_digest, Digest{});
  EXPECT_EQ(l.head(), e.digest);
  EXPECT_EQ(e.cost_micros, 1'500'000);
  const LedgerEntry& f = l.record(1, TokenClass::kOutput, 5, 0.0, "p");
  EXPECT_EQ(f.prev_digest, l.entries()[0].digest);
}

TEST(LedgerTest, DeterministicAndOrderSensitive) {
  Ledger a, b, c;
  for (Ledger* l : {&a, &b}) {
    l->record(0, TokenClass::kInput, 10, 1.0, "p");
    l->record(1, TokenClass::kOutput, 5, 2.0, "p");
  }
  c.record(1, TokenClass::kOutput, 5, 2.0, "p");
  c.record(0, TokenClass::kInput, 10, 1.0, "p");
  EXPECT_EQ(a.head(), b.head());
  EXPECT_NE(a.head(), c.head());
}

TEST(LedgerTest, DigestMatchesCanonicalLayout) {
  Ledger l;
  l.record(0, TokenClass::kInput, 10, 1.0, "greedy/oracle/value_aware");
  l.record(3, TokenClass::kReasoning, 7, 0.25, "greedy/oracle/value_aware");
  // Entry 0 serialized by hand.
  std::vector<std::uint8_t> rec0 = {0, 0, 0, 0, 0, 0, 0, 0,  0, 0, 0, 0, 0, 0, 0, 0,  0,
                                    0, 0, 0, 0, 0, 0, 0, 10, 0, 0, 0, 0, 0, 0x0f, 0x42, 0x40,
                                    0, 0, 0, 25};
  const std::string pid = "greedy/oracle/value_aware";
  rec0.insert(rec0.end(), pid.begin(), pid.end());
  rec0.insert(rec0.end(), 32, 0);
  const Digest d0 = sha256(rec0);
  EXPECT_EQ(l.entries()[0].digest, d0);
}

TEST(VerifyChainTest, Examples) {
  Ledger l = random_ledger(100, 1);
  EXPECT_FALSE(verify_chain(l).has_value());
  l.mutable_entries()[7].count += 1;
  EXPECT_EQ(verify_chain(l), std::optional<std::uint64_t>{7});
  EXPECT_FALSE(verify_chain(Ledger{}).has_value());
}

TEST(VerifyChainTest, RecomputedDigestStillBreaksSuccessor) {
  Ledger l = random_ledger(20, 2);
  LedgerEntry& e = l.mutable_entries()[5];
  e.cost_micros += 1;
  e.digest = entry_digest(e);
  EXPECT_EQ(verify_chain(l), std::optional<std::uint64_t>{6});
}

TEST(VerifyChainTest, DetectsEverySingleBitFlipInTheFile) {
  const Ledger l = random_ledger(50, 3);
  const std::vector<std::uint8_t> bytes = serialize_ledger(l);
  RngStream s = derive_rng_stream(4, "tamper");
  int detected = 0;
  constexpr int kTrials = 1000;
  for (int t = 0; t < kTrials; ++t) {
    std::vector<std::uint8_t> mutated = bytes;
    const std::size_t pos = 8 + s.below(bytes.size() - 8);
    mutated[pos] ^= static_cast<std::uint8_t>(1u << s.below(8));
    try {
      if (verify_chain(parse_ledger(mutated)).has_value()) ++detected;
    } catch (const Error&) {
      ++detected;
    }
  }
  EXPECT_EQ(detected, kTrials);
}

TEST(VerifyChainTest, DetectsFieldMutations) {
  RngStream s = derive_rng_stream(5, "tamper");
  for (int t = 0; t < 200; ++t) {
    Ledger l = random_ledger(10, static_cast<std::uint64_t>(t));
    const std::size_t i = s.below(10);
    LedgerEntry& e = l.mutable_entries()[i];
    switch (s.below(6)) {
      case 0: e.step ^= std::uint64_t{1} << s.below(60); break;
      case 1: e.count ^= std::uint64_t{1} << s.below(60); break;
      case 2: e.cost_micros ^= std::int64_t{1} << s.below(60); break;
      case 3: e.policy_id.push_back('x'); break;
      case 4: e.token_class = static_cast<TokenClass>((static_cast<int>(e.token_class) + 1) % 6); break;
      default: e.prev_digest[s.below(32)] ^= 1; break;
    }
    EXPECT_EQ(verify_chain(l), std::optional<std::uint64_t>{i});
  }
}

TEST(VerificationOverheadTest, Examples) {
  EXPECT_DOUBLE_EQ(verification_overhead(2, 100), 0.02);
  EXPECT_EQ(verification_overhead(0, 100), 0.0);
  EXPECT_THROW(verification_overhead(1, 0), Error);
}

TEST(SummarizeTest, Examples) {
  Ledger l;
  l.record(0, TokenClass::kInput, 10, 1.0, "p");
  l.record(0, TokenClass::kOutput, 5, 0.5, "p");
  l.record(1, TokenClass::kReasoning, 7, 0.25, "p");
  const auto t = summarize_by_class(l);
  EXPECT_EQ(t.at(TokenClass::kInput).count, 10u);
  EXPECT_EQ(t.at(TokenClass::kOutput).count, 5u);
  EXPECT_EQ(t.at(TokenClass::kReasoning).count, 7u);
  EXPECT_EQ(t.at(TokenClass::kTool).count, 0u);
  EXPECT_DOUBLE_EQ(t.at(TokenClass::kReasoning).cost, 0.25);
  for (const auto& [cls, tot] : summarize_by_class(Ledger{})) EXPECT_EQ(tot, ClassTotals{});
  EXPECT_EQ(summarize_by_class(Ledger{}).size(), kNumTokenClasses);
}

TEST(LedgerFileTest, RoundTripAndTextExport) {
  const Ledger l = random_ledger(30, 6);
  const auto path = std::filesystem::temp_directory_path() / "tokenecon_ledger_test.bin";
  write_ledger_file(l, path.string());
  const Ledger back = read_ledger_file(path.string());
  EXPECT_EQ(back.entries(), l.entries());
  std::filesystem::remove(path);
  const std::string text = ledger_text(l);
  EXPECT_NE(text.find(to_hex(l.head())), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 31);
}

TEST(LedgerFileTest, RejectsMalformedFiles) {
  EXPECT_THROW(parse_ledger({'T', 'E', 'L'}), Error);
  EXPECT_THROW(parse_ledger({'X', 'E', 'L', 'G', 0, 0, 0, 1}), Error);
  EXPECT_THROW(parse_ledger({'T', 'E', 'L', 'G', 0, 0, 0, 2}), Error);
  std::vector<std::uint8_t> bytes = serialize_ledger(random_ledger(2, 7));
  bytes.pop_back();
  EXPECT_THROW(parse_ledger(bytes), Error);
  EXPECT_TRUE(parse_ledger({'T', 'E', 'L', 'G', 0, 0, 0, 1}).empty());
}

TEST(LedgerTest, NonFiniteCostRejected) {
  Ledger l;
  EXPECT_THROW(l.record(0, TokenClass::kInput, 1, kUnconstrained, "p"), Error);
}

}  // namespace
}  // namespace tokenecon
