#include "shuffle_align/instance.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "shuffle_align/errors.hpp"
#include "shuffle_align/rng.hpp"

namespace shuffle_align {

std::string to_string(ChannelMode mode) {
  return mode == ChannelMode::Direct ? "direct" : "composed";
}

ChannelMode channel_mode_from_string(const std::string& s) {
  if (s == "direct") return ChannelMode::Direct;
  if (s == "composed") return ChannelMode::Composed;
  throw InvalidInput("unknown channel mode: " + s);
}

std::string to_string(PlacementRule rule) {
  return rule == PlacementRule::Uniform ? "uniform" : "random";
}

namespace {

void check_placement(int K, int N, const Placement& placement) {
  if (K < 1 || N < 1) throw InvalidInput("K and N must be positive");
  if (static_cast<int>(placement.size()) != K)
    throw InvalidPlacement("placement must have one file set per user");
  std::vector<char> covered(static_cast<size_t>(N) + 1, 0);
  for (const auto& files : placement) {
    int prev = 0;
    for (int n : files) {
      if (n < 1 || n > N) throw InvalidInput("file index out of range: " + std::to_string(n));
      if (n <= prev) throw InvalidPlacement("file sets must be strictly ascending");
      prev = n;
      covered[static_cast<size_t>(n)] = 1;
    }
  }
  for (int n = 1; n <= N; ++n) {
    if (!covered[static_cast<size_t>(n)])
      throw InvalidPlacement("placement does not cover file " + std::to_string(n));
  }
}

}  // namespace

IndexSets build_index_sets(int K, int N, const Placement& placement) {
  check_placement(K, N, placement);
  IndexSets idx;
  idx.T = K * N;
  idx.Tk.resize(static_cast<size_t>(K));
  idx.Rk.resize(static_cast<size_t>(K));
  for (int k = 1; k <= K; ++k) {
    auto& avail = idx.Tk[static_cast<size_t>(k - 1)];
    for (int j = 1; j <= K; ++j)
      for (int n : placement[static_cast<size_t>(k - 1)]) avail.push_back((j - 1) * N + n);
    std::sort(avail.begin(), avail.end());

    auto& wanted = idx.Rk[static_cast<size_t>(k - 1)];
    const auto& files = placement[static_cast<size_t>(k - 1)];
    for (int n = 1; n <= N; ++n) {
      if (!std::binary_search(files.begin(), files.end(), n)) wanted.push_back((k - 1) * N + n);
    }
  }
  return idx;
}

Placement uniform_placement(int K, int N, int mu, std::uint64_t seed) {
  if (K < 1 || N < 1 || mu < 1) throw InvalidInput("K, N, mu must be positive");
  if (mu > N) throw InvalidInput("mu cannot exceed the number of files");
  if ((static_cast<long long>(mu) * K) % N != 0)
    throw InfeasiblePlacement("uniform placement needs mu*K divisible by N (" +
                              std::to_string(mu * K) + " mod " + std::to_string(N) + " != 0)");
  const int rho = mu * K / N;  // users per file

  // Cyclic base design: the rho copies of file j go to rho consecutive users
  // (mod K), giving every user exactly mu distinct files. Seeded permutations
  // of user and file labels randomize the assignment without breaking the
  // replication counts.
  Rng rng(mix_seed(seed, fnv1a64("uniform-placement")));
  std::vector<int> file_label(static_cast<size_t>(N));
  std::iota(file_label.begin(), file_label.end(), 1);
  rng.shuffle(file_label.begin(), file_label.end());
  std::vector<int> user_label(static_cast<size_t>(K));
  std::iota(user_label.begin(), user_label.end(), 0);
  rng.shuffle(user_label.begin(), user_label.end());

  Placement placement(static_cast<size_t>(K));
  long long slot = 0;
  for (int j = 0; j < N; ++j) {
    for (int copy = 0; copy < rho; ++copy, ++slot) {
      const int user = user_label[static_cast<size_t>(slot % K)];
      placement[static_cast<size_t>(user)].push_back(file_label[static_cast<size_t>(j)]);
    }
  }
  for (auto& files : placement) std::sort(files.begin(), files.end());
  return placement;
}

Placement random_placement(int K, int N, int mu, std::uint64_t seed) {
  if (K < 1 || N < 1 || mu < 1) throw InvalidInput("K, N, mu must be positive");
  if (mu > N) throw InvalidInput("mu cannot exceed the number of files");
  if (static_cast<long long>(mu) * K < N)
    throw InfeasiblePlacement("mu*K < N: users cannot cover the dataset");

  Rng rng(mix_seed(seed, fnv1a64("random-placement")));
  std::vector<std::set<int>> held(static_cast<size_t>(K));
  for (int n = 1; n <= N; ++n) held[static_cast<size_t>(n % K)].insert(n);

  for (int k = 0; k < K; ++k) {
    auto& mine = held[static_cast<size_t>(k)];
    std::vector<int> pool;
    for (int n = 1; n <= N; ++n)
      if (!mine.count(n)) pool.push_back(n);
    rng.shuffle(pool.begin(), pool.end());
    size_t next = 0;
    while (static_cast<int>(mine.size()) < mu) mine.insert(pool[next++]);
  }

  Placement placement(static_cast<size_t>(K));
  for (int k = 0; k < K; ++k)
    placement[static_cast<size_t>(k)].assign(held[static_cast<size_t>(k)].begin(),
                                             held[static_cast<size_t>(k)].end());
  return placement;
}

ChannelSet sample_channels(int K, int L, int M, ChannelMode mode, std::uint64_t seed) {
  if (K < 1 || L < 1 || M < 1) throw InvalidInput("channel dimensions must be positive");
  ChannelSet ch;
  ch.mode = mode;
  ch.K = K;
  ch.L = L;
  ch.M = M;
  Rng rng(mix_seed(seed, fnv1a64("channels")));
  if (mode == ChannelMode::Direct) {
    ch.Hki.reserve(static_cast<size_t>(K) * K);
    for (int k = 0; k < K * K; ++k) ch.Hki.push_back(random_cgauss_matrix(L, L, rng));
  } else {
    ch.Hup.reserve(static_cast<size_t>(K));
    ch.Hdown.reserve(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) ch.Hup.push_back(random_cgauss_matrix(M, L, rng));
    for (int k = 0; k < K; ++k) ch.Hdown.push_back(random_cgauss_matrix(L, M, rng));
    ch.Hki.reserve(static_cast<size_t>(K) * K);
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < K; ++i)
        ch.Hki.push_back(ch.Hdown[static_cast<size_t>(k)] * ch.Hup[static_cast<size_t>(i)]);
  }
  return ch;
}

ProblemInstance make_instance(int K, int N, int mu, int L, int M, int d,
                              PlacementRule rule, ChannelMode mode, std::uint64_t seed) {
  ProblemInstance inst;
  inst.K = K;
  inst.N = N;
  inst.mu = mu;
  inst.L = L;
  inst.M = M;
  inst.d = d;
  inst.seed = seed;
  inst.placement = rule == PlacementRule::Uniform
                       ? uniform_placement(K, N, mu, mix_seed(seed, 1))
                       : random_placement(K, N, mu, mix_seed(seed, 1));
  inst.channels = sample_channels(K, L, M, mode, mix_seed(seed, 2));
  validate(inst);
  return inst;
}

void validate(const ProblemInstance& inst) {
  if (inst.K < 2) throw InvalidInput("instances need at least two users");
  if (inst.N < 1 || inst.L < 1 || inst.M < 1 || inst.d < 1)
    throw InvalidInput("N, L, M, d must be positive");
  if (static_cast<long long>(inst.mu) * inst.K < inst.N)
    throw InfeasiblePlacement("mu*K < N: the dataset cannot be covered");
  check_placement(inst.K, inst.N, inst.placement);
  for (const auto& files : inst.placement) {
    if (static_cast<int>(files.size()) > inst.mu)
      throw InvalidPlacement("a user stores more than mu files");
  }
  const auto& ch = inst.channels;
  if (ch.K != inst.K || ch.L != inst.L ||
      (ch.mode == ChannelMode::Composed && ch.M != inst.M))
    throw InvalidInput("channel dimensions disagree with the instance");
  if (static_cast<int>(ch.Hki.size()) != inst.K * inst.K)
    throw InvalidInput("channel grid must hold K*K matrices");
  for (const auto& h : ch.Hki) {
    if (h.rows() != inst.L || h.cols() != inst.L)
      throw InvalidInput("user-to-user channel blocks must be L x L");
    if (!h.allFinite()) throw InvalidInput("channel entries must be finite");
  }
}

namespace {

void print_matrix(std::ostream& os, const CMat& m) {
  char buf[64];
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      const Complex v = m(r, c);
      std::snprintf(buf, sizeof buf, "%.17g %.17g", v.real(), v.imag());
      if (c) os << ' ';
      os << buf;
    }
    os << '\n';
  }
}

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  bool next(std::string& out) {
    if (!std::getline(is_, out)) return false;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    ++line_;
    return true;
  }

  std::string require(const char* what) {
    std::string s;
    if (!next(s)) throw ParseError(line_ + 1, std::string("unexpected end of file, expected ") + what);
    return s;
  }

  void require_blank() {
    const std::string s = require("blank separator line");
    if (!s.empty()) throw ParseError(line_, "expected blank separator line");
  }

  int line() const { return line_; }

 private:
  std::istream& is_;
  int line_ = 0;
};

CMat read_matrix(LineReader& lr, Index rows, Index cols) {
  CMat m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    std::istringstream row(lr.require("matrix row"));
    for (Index c = 0; c < cols; ++c) {
      double re, im;
      if (!(row >> re >> im)) throw ParseError(lr.line(), "matrix row has too few entries");
      m(r, c) = Complex(re, im);
    }
    double extra;
    if (row >> extra) throw ParseError(lr.line(), "matrix row has extra entries");
  }
  return m;
}

}  // namespace

void save_instance(const ProblemInstance& inst, std::ostream& os) {
  os << inst.K << ' ' << inst.N << ' ' << inst.mu << ' ' << inst.L << ' ' << inst.M << ' '
     << inst.d << ' ' << to_string(inst.channels.mode) << ' ' << inst.seed << '\n';
  for (const auto& files : inst.placement) {
    if (files.empty()) {
      os << "-\n";  // empty set marker; a bare blank line would end the stanza
      continue;
    }
    for (size_t i = 0; i < files.size(); ++i) {
      if (i) os << ' ';
      os << files[i];
    }
    os << '\n';
  }
  const auto& ch = inst.channels;
  if (ch.mode == ChannelMode::Direct) {
    for (const auto& h : ch.Hki) {
      os << '\n';
      print_matrix(os, h);
    }
  } else {
    for (const auto& h : ch.Hup) {
      os << '\n';
      print_matrix(os, h);
    }
    for (const auto& h : ch.Hdown) {
      os << '\n';
      print_matrix(os, h);
    }
  }
}

ProblemInstance load_instance(std::istream& is) {
  LineReader lr(is);
  ProblemInstance inst;
  {
    std::istringstream head(lr.require("header"));
    std::string mode;
    if (!(head >> inst.K >> inst.N >> inst.mu >> inst.L >> inst.M >> inst.d >> mode >> inst.seed))
      throw ParseError(lr.line(), "header must read: K N mu L M d mode seed");
    inst.channels.mode = channel_mode_from_string(mode);
  }
  if (inst.K < 1 || inst.N < 1) throw ParseError(lr.line(), "K and N must be positive");

  inst.placement.resize(static_cast<size_t>(inst.K));
  for (int k = 0; k < inst.K; ++k) {
    const std::string line = lr.require("placement line");
    if (line == "-") continue;
    std::istringstream row(line);
    int n;
    while (row >> n) inst.placement[static_cast<size_t>(k)].push_back(n);
    if (inst.placement[static_cast<size_t>(k)].empty())
      throw ParseError(lr.line(), "empty placement line (use '-' for an empty set)");
  }

  auto& ch = inst.channels;
  ch.K = inst.K;
  ch.L = inst.L;
  ch.M = inst.M;
  if (ch.mode == ChannelMode::Direct) {
    for (int k = 0; k < inst.K * inst.K; ++k) {
      lr.require_blank();
      ch.Hki.push_back(read_matrix(lr, inst.L, inst.L));
    }
  } else {
    for (int k = 0; k < inst.K; ++k) {
      lr.require_blank();
      ch.Hup.push_back(read_matrix(lr, inst.M, inst.L));
    }
    for (int k = 0; k < inst.K; ++k) {
      lr.require_blank();
      ch.Hdown.push_back(read_matrix(lr, inst.L, inst.M));
    }
    for (int k = 0; k < inst.K; ++k)
      for (int i = 0; i < inst.K; ++i)
        ch.Hki.push_back(ch.Hdown[static_cast<size_t>(k)] * ch.Hup[static_cast<size_t>(i)]);
  }
  validate(inst);
  return inst;
}

void save_instance_file(const ProblemInstance& inst, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot open for writing: " + path);
  save_instance(inst, os);
}

ProblemInstance load_instance_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open: " + path);
  return load_instance(is);
}

}  // namespace shuffle_align
