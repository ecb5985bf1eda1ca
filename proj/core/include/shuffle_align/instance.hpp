#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "shuffle_align/types.hpp"

namespace shuffle_align {

// File and message indices are 1-based throughout, matching the serialized
// formats. Message (k-1)*N + n is the intermediate value of task k on file n.

using FileSet = std::vector<int>;        // ascending file indices
using Placement = std::vector<FileSet>;  // one set per user

enum class ChannelMode { Direct, Composed };

std::string to_string(ChannelMode mode);
ChannelMode channel_mode_from_string(const std::string& s);

/// Quasi-static channel realization. In composed mode the user-to-user
/// matrices are exact products of the downlink and uplink legs.
struct ChannelSet {
  ChannelMode mode = ChannelMode::Direct;
  int K = 0;
  int L = 0;
  int M = 0;
  std::vector<CMat> Hup;    // composed only: K matrices, M x L
  std::vector<CMat> Hdown;  // composed only: K matrices, L x M
  std::vector<CMat> Hki;    // K*K matrices, L x L; row-major over (k, i)

  const CMat& H(int k, int i) const { return Hki[static_cast<size_t>(k - 1) * K + (i - 1)]; }
  CMat& H(int k, int i) { return Hki[static_cast<size_t>(k - 1) * K + (i - 1)]; }
};

struct ProblemInstance {
  int K = 0;   // users
  int N = 0;   // files
  int mu = 0;  // per-user storage, in files
  int L = 1;   // antennas per user
  int M = 1;   // antennas at the access point
  int d = 1;   // datastreams per message
  Placement placement;
  std::uint64_t seed = 0;
  ChannelSet channels;
};

/// Message index sets: Tk[k] holds what user k computed locally,
/// Rk[k] what it still needs for its own task.
struct IndexSets {
  int T = 0;
  std::vector<std::vector<int>> Tk;
  std::vector<std::vector<int>> Rk;
};

inline int file_of(int msg, int N) { return (msg - 1) % N + 1; }
inline int task_of(int msg, int N) { return (msg - 1) / N + 1; }

IndexSets build_index_sets(int K, int N, const Placement& placement);

/// Every user stores exactly mu files and every file lands on exactly
/// mu*K/N users. Requires mu*K divisible by N.
Placement uniform_placement(int K, int N, int mu, std::uint64_t seed);

/// Every user stores exactly mu distinct files; coverage is forced by
/// assigning file n to user (n mod K)+1 before random filling.
Placement random_placement(int K, int N, int mu, std::uint64_t seed);

ChannelSet sample_channels(int K, int L, int M, ChannelMode mode, std::uint64_t seed);

enum class PlacementRule { Uniform, Random };

std::string to_string(PlacementRule rule);

ProblemInstance make_instance(int K, int N, int mu, int L, int M, int d,
                              PlacementRule rule, ChannelMode mode, std::uint64_t seed);

/// Throws InvalidInput / InvalidPlacement when an instance breaks its invariants.
void validate(const ProblemInstance& inst);

// Line-oriented text serialization; doubles printed with 17 significant
// digits so a round trip is bit exact.
void save_instance(const ProblemInstance& inst, std::ostream& os);
ProblemInstance load_instance(std::istream& is);
void save_instance_file(const ProblemInstance& inst, const std::string& path);
ProblemInstance load_instance_file(const std::string& path);

}  // namespace shuffle_align
