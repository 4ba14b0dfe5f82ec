#include "specjac/markov.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace specjac {

void Prompt::validate() const {
  if (target_len <= 0) throw std::invalid_argument("Prompt: target length must be positive");
  if (static_cast<int>(prefix.size()) >= target_len) {
    throw std::invalid_argument("Prompt: prefix must be shorter than the target length");
  }
}

namespace {

// Marsaglia-Tsang Gamma sampling on top of SeededRng, with Box-Muller
// normals. std::gamma_distribution is implementation-defined across standard
// libraries, which would break golden tables; this path is pinned.
double draw_normal(SeededRng& rng) {
  double u1 = 1.0 - rng.next_double();  // (0, 1], keeps the log finite
  double u2 = rng.next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double draw_gamma(SeededRng& rng, double shape) {
  if (shape < 1.0) {
    double u = 1.0 - rng.next_double();
    return draw_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = draw_normal(rng);
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = 1.0 - rng.next_double();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

Distribution draw_dirichlet_row(SeededRng& rng, int vocab, double concentration) {
  std::vector<double> w(static_cast<size_t>(vocab));
  for (;;) {
    for (double& x : w) x = draw_gamma(rng, concentration);
    double total = stable_sum(w);
    if (total > 1e-290 && std::isfinite(total)) {
      for (double& x : w) x /= total;
      return Distribution(std::move(w));
    }
    // Pathologically small total mass: redraw from the continued stream.
  }
}

constexpr uint64_t kAttractorStream = 0xA77AC708ULL;

size_t checked_row_count(int order, int vocab) {
  double rows = std::pow(static_cast<double>(vocab) + 1.0, order);
  if (rows > 1e7) throw std::length_error("MarkovModel: context table exceeds 10^7 rows");
  return static_cast<size_t>(std::llround(rows));
}

}  // namespace

MarkovModel MarkovModel::build(uint64_t seed, int order, int vocab, double concentration,
                               double attractor_weight) {
  if (vocab < 2) throw std::invalid_argument("MarkovModel: vocab must be >= 2");
  if (order < 1) throw std::invalid_argument("MarkovModel: order must be >= 1");
  if (!(concentration > 0.0)) throw std::invalid_argument("MarkovModel: concentration must be positive");
  if (attractor_weight < 0.0 || attractor_weight > 1.0) {
    throw std::invalid_argument("MarkovModel: attractor weight must be in [0, 1]");
  }

  MarkovModel m;
  m.order_ = order;
  m.vocab_ = vocab;
  m.seed_ = seed;
  m.concentration_ = concentration;
  m.attractor_weight_ = attractor_weight;

  size_t n_rows = checked_row_count(order, vocab);
  Distribution attractor = Distribution::uniform(vocab);
  if (attractor_weight > 0.0) {
    SeededRng arng(SeededRng::derive(seed, kAttractorStream));
    attractor = draw_dirichlet_row(arng, vocab, concentration);
  }

  m.rows_.reserve(n_rows);
  for (size_t c = 0; c < n_rows; ++c) {
    SeededRng rng(SeededRng::derive(seed, c));
    Distribution base = draw_dirichlet_row(rng, vocab, concentration);
    if (attractor_weight > 0.0) {
      std::vector<double> mixed(static_cast<size_t>(vocab));
      for (int i = 0; i < vocab; ++i) {
        mixed[static_cast<size_t>(i)] =
            (1.0 - attractor_weight) * base[i] + attractor_weight * attractor[i];
      }
      m.rows_.push_back(Distribution::from_unnormalized(std::move(mixed)));
    } else {
      m.rows_.push_back(std::move(base));
    }
  }
  return m;
}

MarkovModel MarkovModel::from_rows(int order, int vocab, std::vector<Distribution> rows) {
  if (vocab < 2) throw std::invalid_argument("MarkovModel: vocab must be >= 2");
  if (order < 1) throw std::invalid_argument("MarkovModel: order must be >= 1");
  size_t n_rows = checked_row_count(order, vocab);
  if (rows.size() != n_rows) {
    throw std::invalid_argument("MarkovModel: expected (vocab+1)^order rows");
  }
  for (const auto& r : rows) {
    if (r.size() != vocab) throw std::invalid_argument("MarkovModel: row vocabulary mismatch");
  }
  MarkovModel m;
  m.order_ = order;
  m.vocab_ = vocab;
  m.rows_ = std::move(rows);
  return m;
}

size_t MarkovModel::context_index(std::span<const int> prefix) const {
  // Contexts are the last `order` symbols, front-padded with the begin
  // marker (encoded as symbol V), read as a base-(V+1) number.
  size_t idx = 0;
  size_t base = static_cast<size_t>(vocab_) + 1;
  int n = static_cast<int>(prefix.size());
  for (int k = order_; k >= 1; --k) {
    int sym;
    if (n - k >= 0) {
      int tok = prefix[static_cast<size_t>(n - k)];
      if (tok < 0 || tok >= vocab_) {
        throw std::invalid_argument("MarkovModel: token index out of vocabulary");
      }
      sym = tok;
    } else {
      sym = vocab_;  // begin marker
    }
    idx = idx * base + static_cast<size_t>(sym);
  }
  return idx;
}

const Distribution& MarkovModel::next_token_distribution(std::span<const int> prefix) const {
  return rows_[context_index(prefix)];
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) throw std::invalid_argument("model file: bad number '" + s + "'");
  return v;
}

}  // namespace

void MarkovModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("MarkovModel::save: cannot open " + path.string());
  out << "specjac-markov v1\n";
  out << "order " << order_ << "\n";
  out << "vocab " << vocab_ << "\n";
  out << "seed " << seed_ << "\n";
  out << "concentration " << format_double(concentration_) << "\n";
  out << "attractor_weight " << format_double(attractor_weight_) << "\n";
  out << "rows " << rows_.size() << "\n";
  for (const auto& row : rows_) {
    for (int i = 0; i < row.size(); ++i) {
      if (i) out << ' ';
      out << format_double(row[i]);
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("MarkovModel::save: write failed for " + path.string());
}

MarkovModel MarkovModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("MarkovModel::load: cannot open " + path.string());
  std::string magic, version;
  in >> magic >> version;
  if (magic != "specjac-markov" || version != "v1") {
    throw std::runtime_error("MarkovModel::load: unrecognized header in " + path.string());
  }
  MarkovModel m;
  std::string key;
  size_t n_rows = 0;
  while (in >> key) {
    if (key == "order") in >> m.order_;
    else if (key == "vocab") in >> m.vocab_;
    else if (key == "seed") in >> m.seed_;
    else if (key == "concentration") { std::string v; in >> v; m.concentration_ = parse_double(v); }
    else if (key == "attractor_weight") { std::string v; in >> v; m.attractor_weight_ = parse_double(v); }
    else if (key == "rows") { in >> n_rows; break; }
    else throw std::runtime_error("MarkovModel::load: unknown header key '" + key + "'");
  }
  if (n_rows == 0 || n_rows != checked_row_count(m.order_, m.vocab_)) {
    throw std::runtime_error("MarkovModel::load: inconsistent row count");
  }
  m.rows_.reserve(n_rows);
  for (size_t r = 0; r < n_rows; ++r) {
    std::vector<double> row(static_cast<size_t>(m.vocab_));
    for (double& v : row) {
      std::string tok;
      if (!(in >> tok)) throw std::runtime_error("MarkovModel::load: truncated table");
      v = parse_double(tok);
    }
    m.rows_.push_back(Distribution(std::move(row)));
  }
  return m;
}

size_t ExactSequenceDistribution::index_of(std::span<const int> completion) const {
  if (static_cast<int>(completion.size()) != free_len) {
    throw std::invalid_argument("index_of: completion length mismatch");
  }
  size_t idx = 0;
  for (int t : completion) {
    if (t < 0 || t >= vocab) throw std::invalid_argument("index_of: token out of range");
    idx = idx * static_cast<size_t>(vocab) + static_cast<size_t>(t);
  }
  return idx;
}

double ExactSequenceDistribution::prob_of(std::span<const int> completion) const {
  return probs[index_of(completion)];
}

ExactSequenceDistribution exact_sequence_distribution(const MarkovModel& model,
                                                      const Prompt& prompt) {
  prompt.validate();
  int free_len = prompt.free_tokens();
  double states = std::pow(static_cast<double>(model.vocab()), free_len);
  if (states > 1e7) {
    throw std::length_error("exact_sequence_distribution: state space exceeds 10^7");
  }

  ExactSequenceDistribution out;
  out.vocab = model.vocab();
  out.free_len = free_len;
  out.probs.assign(static_cast<size_t>(std::llround(states)), 0.0);

  std::vector<int> seq = prompt.prefix;
  seq.resize(prompt.prefix.size() + static_cast<size_t>(free_len));

  // Depth-first walk with a running chain-rule product.
  struct Frame { int token; double prob; };
  std::vector<int> completion(static_cast<size_t>(free_len));
  auto recurse = [&](auto&& self, int depth, double acc) -> void {
    if (depth == free_len) {
      out.probs[out.index_of(completion)] = acc;
      return;
    }
    std::span<const int> ctx(seq.data(), prompt.prefix.size() + static_cast<size_t>(depth));
    const Distribution& d = model.next_token_distribution(ctx);
    for (int t = 0; t < model.vocab(); ++t) {
      completion[static_cast<size_t>(depth)] = t;
      seq[prompt.prefix.size() + static_cast<size_t>(depth)] = t;
      self(self, depth + 1, acc * d[t]);
    }
  };
  recurse(recurse, 0, 1.0);
  return out;
}

ArResult autoregressive_decode(const MarkovModel& model, const Prompt& prompt, SeededRng& rng) {
  prompt.validate();
  ArResult res;
  res.tokens = prompt.prefix;
  while (static_cast<int>(res.tokens.size()) < prompt.target_len) {
    const Distribution& d = model.next_token_distribution(res.tokens);
    res.tokens.push_back(sample(d, rng));
    ++res.nfe;
  }
  return res;
}

ArResult greedy_autoregressive_decode(const MarkovModel& model, const Prompt& prompt) {
  prompt.validate();
  ArResult res;
  res.tokens = prompt.prefix;
  while (static_cast<int>(res.tokens.size()) < prompt.target_len) {
    const Distribution& d = model.next_token_distribution(res.tokens);
    int best = 0;
    for (int i = 1; i < d.size(); ++i) {
      if (d[i] > d[best]) best = i;
    }
    res.tokens.push_back(best);
    ++res.nfe;
  }
  return res;
}

std::vector<Prompt> make_prompts(uint64_t seed, int count, int prefix_len, int target_len,
                                 int vocab) {
  if (count < 1) throw std::invalid_argument("make_prompts: count must be positive");
  if (prefix_len < 0) throw std::invalid_argument("make_prompts: prefix length must be >= 0");
  std::vector<Prompt> prompts;
  prompts.reserve(static_cast<size_t>(count));
  for (int id = 0; id < count; ++id) {
    SeededRng rng(SeededRng::derive(seed, static_cast<uint64_t>(id)));
    Prompt p;
    p.id = id;
    p.target_len = target_len;
    p.prefix.reserve(static_cast<size_t>(prefix_len));
    for (int i = 0; i < prefix_len; ++i) {
      p.prefix.push_back(static_cast<int>(rng.next_below(static_cast<uint64_t>(vocab))));
    }
    p.validate();
    prompts.push_back(std::move(p));
  }
  return prompts;
}

}  // namespace specjac
