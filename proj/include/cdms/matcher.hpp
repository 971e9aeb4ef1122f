// Name-based schema matcher: integrates local schemas submitted by
// registering spaces into the server's global schemas.
//
// Attribute matching fires four linguistic criteria in decreasing order of
// their current weights (exact, stemming, token-substring, synonym); the
// first one that fires proposes the candidate. Non-exact candidates wait in
// a review queue for the administrator; criterion weights track the
// precision of recent decisions over a sliding window. Schema matching
// integrates a local schema into the global schema sharing the largest
// common subset of matched attributes, or creates a new global schema.
#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cdms/model.hpp"

namespace cdms::matcher {

enum class CriterionId { Exact, Stem, Substring, Synonym };

inline const char* to_string(CriterionId c) {
  switch (c) {
    case CriterionId::Exact: return "exact";
    case CriterionId::Stem: return "stem";
    case CriterionId::Substring: return "substring";
    case CriterionId::Synonym: return "synonym";
  }
  return "?";
}

inline std::optional<CriterionId> criterion_from_string(std::string_view s) {
  if (s == "exact") return CriterionId::Exact;
  if (s == "stem") return CriterionId::Stem;
  if (s == "substring") return CriterionId::Substring;
  if (s == "synonym") return CriterionId::Synonym;
  return std::nullopt;
}

// precedence for tie-breaks; smaller wins
inline int precedence(CriterionId c) { return static_cast<int>(c); }

struct Criterion {
  CriterionId id = CriterionId::Exact;
  double weight = 1.0;
  std::uint64_t hits = 0;
  std::uint64_t confirms = 0;
  std::uint64_t rejects = 0;
  std::deque<bool> window;  // recent decisions, true = confirm
};

enum class MatchStatus { Pending, Confirmed, Rejected };

inline const char* to_string(MatchStatus s) {
  switch (s) {
    case MatchStatus::Pending: return "pending";
    case MatchStatus::Confirmed: return "confirmed";
    case MatchStatus::Rejected: return "rejected";
  }
  return "?";
}

struct MatchCandidate {
  std::string local_name;
  std::string global_domain;
  std::string global_name;
  CriterionId criterion = CriterionId::Exact;
  double score = 1.0;  // firing criterion's weight at proposal time
  MatchStatus status = MatchStatus::Pending;
  bool conflict = false;  // another local attribute claimed the same global name

  bool same_pair(const MatchCandidate& o) const {
    return local_name == o.local_name && global_domain == o.global_domain &&
           global_name == o.global_name;
  }
};

// Bijective global<->local attribute name mapping for one registered space.
struct SchemaMapping {
  PeerId peer;
  std::string global_domain;
  std::vector<std::pair<std::string, std::string>> pairs;  // (global, local)

  std::map<std::string, std::string> global_to_local() const {
    std::map<std::string, std::string> m;
    for (const auto& [g, l] : pairs) m[g] = l;
    return m;
  }
  std::map<std::string, std::string> local_to_global() const {
    std::map<std::string, std::string> m;
    for (const auto& [g, l] : pairs) m[l] = g;
    return m;
  }
  bool bijective() const {
    std::set<std::string> gs, ls;
    for (const auto& [g, l] : pairs) {
      if (!gs.insert(g).second || !ls.insert(l).second) return false;
    }
    return true;
  }
};

class SynonymDict {
public:
  void add(std::string_view a, std::string_view b) {
    std::string x = lower(a), y = lower(b);
    if (x == y) return;
    pairs_.insert(x < y ? std::make_pair(x, y) : std::make_pair(y, x));
  }

  bool related(std::string_view a, std::string_view b) const {
    std::string x = lower(a), y = lower(b);
    if (x == y) return false;
    return pairs_.count(x < y ? std::make_pair(x, y) : std::make_pair(y, x)) > 0;
  }

  size_t size() const { return pairs_.size(); }

  // line format: tokenA<TAB>tokenB, '#' starts a comment
  void load(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto tab = line.find('\t');
      if (tab == std::string::npos) {
        if (line.find_first_not_of(" \t\r\n") != std::string::npos)
          throw CdmsError("synonym line missing tab separator: " + line);
        continue;
      }
      std::string a = trim(line.substr(0, tab)), b = trim(line.substr(tab + 1));
      if (a.empty() || b.empty()) throw CdmsError("bad synonym line: " + line);
      add(a, b);
    }
  }

  void save(std::ostream& out) const {
    for (const auto& [a, b] : pairs_) out << a << '\t' << b << '\n';
  }

  static SynonymDict seeded() {
    SynonymDict d;
    d.add("home", "house");
    d.add("vacant", "empty");
    d.add("shop", "store");
    return d;
  }

private:
  static std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  }
  static std::string trim(std::string s) {
    auto a = s.find_first_not_of(" \t\r\n");
    auto b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
  }

  std::set<std::pair<std::string, std::string>> pairs_;
};

// Lowercased token split of an attribute or domain name: camelCase and
// snake_case both break into tokens, so "personName" and "person_name"
// normalize identically.
struct TokenForm {
  std::vector<std::string> tokens;
  std::vector<std::string> stems;
};

inline std::string stem(std::string_view token) {
  std::string t(token);
  auto ends = [&](std::string_view suf) {
    return t.size() >= suf.size() && t.compare(t.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (ends("tion") && t.size() > 5) {
    t.erase(t.size() - 4);
    t += 't';
  } else if (ends("ing") && t.size() > 5) {
    t.erase(t.size() - 3);
  } else if (ends("ed") && t.size() > 4) {
    t.erase(t.size() - 2);
  } else if (ends("es") && t.size() > 4) {
    char prev = t[t.size() - 3];
    bool sibilant = prev == 's' || prev == 'x' || prev == 'z' ||
                    (t.size() > 5 && (t.compare(t.size() - 4, 2, "ch") == 0 ||
                                      t.compare(t.size() - 4, 2, "sh") == 0));
    t.erase(t.size() - (sibilant ? 2 : 1));
  } else if (ends("s") && !ends("ss") && t.size() > 3) {
    t.erase(t.size() - 1);
  }
  if (t.size() > 4 && t.back() == 'e') t.pop_back();
  return t;
}

inline TokenForm tokenize(std::string_view name) {
  TokenForm form;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      form.tokens.push_back(cur);
      cur.clear();
    }
  };
  for (size_t i = 0; i < name.size(); ++i) {
    unsigned char c = name[i];
    if (!std::isalnum(c)) {
      flush();
      continue;
    }
    if (std::isupper(c)) {
      bool prev_lower = i > 0 && (std::islower(static_cast<unsigned char>(name[i - 1])) ||
                                  std::isdigit(static_cast<unsigned char>(name[i - 1])));
      bool next_lower = i + 1 < name.size() && std::islower(static_cast<unsigned char>(name[i + 1]));
      if (prev_lower || (next_lower && !cur.empty())) flush();
    }
    cur += static_cast<char>(std::tolower(c));
  }
  flush();
  form.stems.reserve(form.tokens.size());
  for (const auto& t : form.tokens) form.stems.push_back(stem(t));
  return form;
}

struct MatcherState {
  std::array<Criterion, 4> criteria = {
      Criterion{CriterionId::Exact, 1.0},
      Criterion{CriterionId::Stem, 0.75},
      Criterion{CriterionId::Substring, 0.65},
      Criterion{CriterionId::Synonym, 0.55},
  };
  SynonymDict synonyms = SynonymDict::seeded();
  std::vector<MatchCandidate> review_queue;   // pending only
  std::vector<MatchCandidate> decision_log;   // decided candidates, in decision order
  std::set<std::string> rejected_pairs;       // admin rejections bind future matching
  int window_size = 50;

  static std::string pair_key(const std::string& local, const std::string& domain,
                              const std::string& global) {
    return local + '\x1f' + domain + '\x1f' + global;
  }
  bool is_rejected(const std::string& local, const std::string& domain,
                   const std::string& global) const {
    return rejected_pairs.count(pair_key(local, domain, global)) > 0;
  }

  Criterion& criterion(CriterionId id) { return criteria[static_cast<size_t>(id)]; }
  const Criterion& criterion(CriterionId id) const { return criteria[static_cast<size_t>(id)]; }
  double weight(CriterionId id) const { return criterion(id).weight; }

  // decreasing current weight; precedence breaks ties
  std::array<CriterionId, 4> firing_order() const {
    std::array<CriterionId, 4> order = {CriterionId::Exact, CriterionId::Stem,
                                        CriterionId::Substring, CriterionId::Synonym};
    std::stable_sort(order.begin(), order.end(), [&](CriterionId a, CriterionId b) {
      if (weight(a) != weight(b)) return weight(a) > weight(b);
      return precedence(a) < precedence(b);
    });
    return order;
  }

  const TokenForm& tokens(const std::string& name) const {
    auto it = token_cache_.find(name);
    if (it == token_cache_.end()) it = token_cache_.emplace(name, tokenize(name)).first;
    return it->second;
  }

private:
  mutable std::map<std::string, TokenForm> token_cache_;
};

namespace detail {

// Tokens match for the substring criterion when equal or when one is a
// prefix of the other and long enough to be a deliberate abbreviation
// ("addr"/"address" yes, "on"/"location" no).
inline bool token_matches(const std::string& a, const std::string& b) {
  if (a == b) return true;
  const std::string& s = a.size() <= b.size() ? a : b;
  const std::string& t = a.size() <= b.size() ? b : a;
  return s.size() >= 4 && t.compare(0, s.size(), s) == 0;
}

inline bool fires(CriterionId id, const TokenForm& a, const TokenForm& b,
                  const SynonymDict& syn) {
  if (a.tokens.empty() || b.tokens.empty()) return false;
  switch (id) {
    case CriterionId::Exact:
      return a.tokens == b.tokens;
    case CriterionId::Stem:
      return a.stems == b.stems;
    case CriterionId::Substring: {
      // every token of the shorter name must claim a distinct token of the
      // longer one
      const std::vector<std::string>* small = &a.tokens;
      const std::vector<std::string>* big = &b.tokens;
      if (small->size() > big->size()) std::swap(small, big);
      std::vector<bool> taken(big->size(), false);
      for (const auto& tok : *small) {
        bool found = false;
        for (size_t i = 0; i < big->size() && !found; ++i) {
          if (!taken[i] && token_matches(tok, (*big)[i])) {
            taken[i] = true;
            found = true;
          }
        }
        if (!found) return false;
      }
      return true;
    }
    case CriterionId::Synonym: {
      if (a.tokens.size() != b.tokens.size()) return false;
      bool used = false;
      for (size_t i = 0; i < a.tokens.size(); ++i) {
        if (a.tokens[i] == b.tokens[i]) continue;
        if (syn.related(a.tokens[i], b.tokens[i])) {
          used = true;
          continue;
        }
        return false;
      }
      return used;
    }
  }
  return false;
}

// highest-weight criterion that fires for the pair, if any
inline std::optional<CriterionId> first_firing(MatcherState& state, const TokenForm& local,
                                               const TokenForm& global) {
  for (CriterionId id : state.firing_order())
    if (fires(id, local, global, state.synonyms)) return id;
  return std::nullopt;
}

inline bool candidate_before(const MatchCandidate& a, const MatchCandidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.criterion != b.criterion) return precedence(a.criterion) < precedence(b.criterion);
  if (a.global_domain != b.global_domain) return a.global_domain < b.global_domain;
  return a.global_name < b.global_name;
}

}  // namespace detail

// Matches one local attribute against a set of global attributes. Kinds must
// agree for a candidate to exist; exact hits are auto-confirmed.
inline std::vector<MatchCandidate> match_attribute(
    const AttributeDef& local, const std::vector<std::pair<std::string, AttributeDef>>& globals,
    MatcherState& state) {
  std::vector<MatchCandidate> out;
  const TokenForm& lf = state.tokens(local.name);
  for (const auto& [domain, def] : globals) {
    if (def.kind != local.kind) continue;
    if (state.is_rejected(local.name, domain, def.name)) continue;
    auto fired = detail::first_firing(state, lf, state.tokens(def.name));
    if (!fired) continue;
    state.criterion(*fired).hits++;
    MatchCandidate c;
    c.local_name = local.name;
    c.global_domain = domain;
    c.global_name = def.name;
    c.criterion = *fired;
    c.score = state.weight(*fired);
    c.status = *fired == CriterionId::Exact ? MatchStatus::Confirmed : MatchStatus::Pending;
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), detail::candidate_before);
  return out;
}

inline std::vector<MatchCandidate> match_attribute(const AttributeDef& local,
                                                   const std::vector<GlobalSchema>& globals,
                                                   MatcherState& state) {
  std::vector<std::pair<std::string, AttributeDef>> flat;
  for (const auto& g : globals)
    for (const auto& def : g.attributes) flat.emplace_back(g.domain_name, def);
  return match_attribute(local, flat, state);
}

struct IntegrationProposal {
  enum class Kind { Integrate, CreateNew };
  Kind kind = Kind::CreateNew;
  std::string target_domain;  // set when kind == Integrate
  LocalSchema local;
  // best candidate per matched local attribute, within the target schema
  std::vector<MatchCandidate> candidates;

  const MatchCandidate* candidate_for(std::string_view local_name) const {
    for (const auto& c : candidates)
      if (c.local_name == local_name) return &c;
    return nullptr;
  }
};

// Integration target: the global schema with the largest set of matched
// attributes, provided it covers at least half of the local attributes.
// A global schema with the identical domain name is always the target.
inline IntegrationProposal match_schema(const LocalSchema& local,
                                        const std::vector<GlobalSchema>& globals,
                                        MatcherState& state) {
  struct Scored {
    const GlobalSchema* schema;
    std::vector<MatchCandidate> best;  // one per matched local attribute
    int name_sim;                      // 2 exact, 1 synonym, 0 otherwise
  };
  const TokenForm& local_name_form = state.tokens(local.domain_name);
  auto joined = [](const TokenForm& f) {
    std::string out;
    for (const auto& t : f.tokens) {
      out += t;
      out += '\x1f';
    }
    return out;
  };
  std::vector<Scored> scored;
  for (const auto& g : globals) {
    Scored s{&g, {}, 0};
    // exact is pinned at the top weight, so a token-identical name of the
    // same kind always wins; probe an index before scanning
    std::map<std::string, std::vector<const AttributeDef*>> exact_index;
    for (const auto& def : g.attributes)
      exact_index[joined(state.tokens(def.name))].push_back(&def);
    for (const auto& attr : local.attributes) {
      const TokenForm& lf = state.tokens(attr.name);
      std::optional<MatchCandidate> best;
      auto hit = exact_index.find(joined(lf));
      if (hit != exact_index.end()) {
        for (const AttributeDef* def : hit->second) {
          if (def->kind != attr.kind) continue;
          if (state.is_rejected(attr.name, g.domain_name, def->name)) continue;
          MatchCandidate c{attr.name, g.domain_name, def->name, CriterionId::Exact, 1.0,
                           MatchStatus::Confirmed};
          if (!best || detail::candidate_before(c, *best)) best = std::move(c);
        }
        if (best) state.criterion(CriterionId::Exact).hits++;
      }
      if (!best) {
        for (const auto& def : g.attributes) {
          if (def.kind != attr.kind) continue;
          if (state.is_rejected(attr.name, g.domain_name, def.name)) continue;
          auto fired = detail::first_firing(state, lf, state.tokens(def.name));
          if (!fired) continue;
          state.criterion(*fired).hits++;
          MatchCandidate c{attr.name, g.domain_name, def.name, *fired, state.weight(*fired),
                           *fired == CriterionId::Exact ? MatchStatus::Confirmed
                                                        : MatchStatus::Pending};
          if (!best || detail::candidate_before(c, *best)) best = std::move(c);
        }
      }
      if (best) s.best.push_back(std::move(*best));
    }
    const TokenForm& gf = state.tokens(g.domain_name);
    if (gf.tokens == local_name_form.tokens)
      s.name_sim = 2;
    else if (detail::fires(CriterionId::Synonym, local_name_form, gf, state.synonyms))
      s.name_sim = 1;
    scored.push_back(std::move(s));
  }

  IntegrationProposal proposal;
  proposal.local = local;

  const Scored* target = nullptr;
  for (const auto& s : scored)
    if (s.name_sim == 2) target = &s;  // identical domain name wins outright

  if (!target) {
    size_t threshold = (local.attributes.size() + 1) / 2;  // ceil(0.5 * n)
    for (const auto& s : scored) {
      if (s.best.size() < threshold || s.best.empty()) continue;
      if (!target) {
        target = &s;
        continue;
      }
      if (s.best.size() != target->best.size()) {
        if (s.best.size() > target->best.size()) target = &s;
      } else if (s.name_sim != target->name_sim) {
        if (s.name_sim > target->name_sim) target = &s;
      } else if (s.schema->domain_name < target->schema->domain_name) {
        target = &s;
      }
    }
  }

  if (target) {
    proposal.kind = IntegrationProposal::Kind::Integrate;
    proposal.target_domain = target->schema->domain_name;
    proposal.candidates = target->best;
  } else {
    proposal.kind = IntegrationProposal::Kind::CreateNew;
  }
  return proposal;
}

enum class Decision { Confirm, Reject };

class DecisionError : public CdmsError {
public:
  using CdmsError::CdmsError;
};

class IntegrationConflict : public CdmsError {
public:
  IntegrationConflict(const std::string& global_name, const std::string& local_a,
                      const std::string& local_b)
      : CdmsError("conflicting confirmations: locals '" + local_a + "' and '" + local_b +
                  "' both map onto global '" + global_name + "'"),
        global_name(global_name),
        local_a(local_a),
        local_b(local_b) {}
  std::string global_name, local_a, local_b;
};

// Weight update: sliding-window precision with Laplace smoothing,
// w = (confirms_in_window + 1) / (decisions_in_window + 2). Exact is pinned.
inline void record_decision(MatcherState& state, CriterionId id, Decision d) {
  Criterion& c = state.criterion(id);
  (d == Decision::Confirm ? c.confirms : c.rejects)++;
  c.window.push_back(d == Decision::Confirm);
  while (c.window.size() > static_cast<size_t>(state.window_size)) c.window.pop_front();
  if (id == CriterionId::Exact) return;
  size_t confirms = 0;
  for (bool b : c.window) confirms += b;
  c.weight = static_cast<double>(confirms + 1) / static_cast<double>(c.window.size() + 2);
}

// Applies an administrator decision to a pending queue entry, updates the
// firing criterion's weight, and returns the decided candidate.
inline MatchCandidate apply_decision(MatcherState& state, const MatchCandidate& candidate,
                                     Decision d) {
  auto it = std::find_if(state.review_queue.begin(), state.review_queue.end(),
                         [&](const MatchCandidate& q) { return q.same_pair(candidate); });
  if (it == state.review_queue.end())
    throw DecisionError("candidate " + candidate.local_name + " -> " + candidate.global_domain +
                        "." + candidate.global_name + " is not pending");
  MatchCandidate decided = *it;
  state.review_queue.erase(it);
  decided.status = d == Decision::Confirm ? MatchStatus::Confirmed : MatchStatus::Rejected;
  record_decision(state, decided.criterion, d);
  if (d == Decision::Reject)
    state.rejected_pairs.insert(MatcherState::pair_key(decided.local_name, decided.global_domain,
                                                       decided.global_name));
  state.decision_log.push_back(decided);
  return decided;
}

namespace detail {

// Append one unmatched local attribute to the target schema under its own
// name, renaming with a numeric suffix when the name is already taken (only
// possible for a different kind; identical name + kind matches exactly).
inline std::string place_unmatched(GlobalSchema& target, const AttributeDef& local_def,
                                   const std::set<std::string>& used_globals) {
  std::string name = local_def.name;
  int suffix = 2;
  while (target.find(name) || used_globals.count(name))
    name = local_def.name + "_" + std::to_string(suffix++);
  AttributeDef appended = local_def;
  appended.name = name;
  target.attributes.push_back(appended);
  return name;
}

struct IntegrationOutcome {
  SchemaMapping mapping;
  std::vector<std::string> appended;  // global names added to the target schema
};

// Shared integration core. `resolved` gives the effective status of every
// proposal candidate; pending candidates must not reach here.
inline IntegrationOutcome integrate_resolved(std::vector<GlobalSchema>& globals,
                                             const IntegrationProposal& proposal,
                                             const std::map<std::string, MatchStatus>& resolved,
                                             bool bump_member_count) {
  IntegrationOutcome out;
  if (proposal.kind == IntegrationProposal::Kind::CreateNew) {
    GlobalSchema fresh;
    fresh.domain_name = proposal.local.domain_name;
    fresh.attributes = proposal.local.attributes;
    fresh.member_count = bump_member_count ? 1 : 0;
    globals.push_back(std::move(fresh));
    out.mapping.global_domain = proposal.local.domain_name;
    for (const auto& a : proposal.local.attributes) out.mapping.pairs.emplace_back(a.name, a.name);
    return out;
  }

  GlobalSchema* target = nullptr;
  for (auto& g : globals)
    if (g.domain_name == proposal.target_domain) target = &g;
  if (!target) throw CdmsError("integration target vanished: " + proposal.target_domain);

  out.mapping.global_domain = target->domain_name;
  std::set<std::string> used_globals;
  std::map<std::string, std::string> confirmed;  // local -> global
  for (const auto& c : proposal.candidates) {
    auto it = resolved.find(c.local_name);
    MatchStatus status = it == resolved.end() ? c.status : it->second;
    if (status == MatchStatus::Pending)
      throw DecisionError("candidate for '" + c.local_name + "' still pending");
    if (status != MatchStatus::Confirmed) continue;
    if (used_globals.count(c.global_name)) {
      std::string other;
      for (const auto& [l, g] : confirmed)
        if (g == c.global_name) other = l;
      throw IntegrationConflict(c.global_name, other, c.local_name);
    }
    used_globals.insert(c.global_name);
    confirmed[c.local_name] = c.global_name;
  }

  for (const auto& attr : proposal.local.attributes) {
    auto it = confirmed.find(attr.name);
    if (it != confirmed.end()) {
      out.mapping.pairs.emplace_back(it->second, attr.name);
      continue;
    }
    std::string placed = place_unmatched(*target, attr, used_globals);
    out.appended.push_back(placed);
    used_globals.insert(placed);
    out.mapping.pairs.emplace_back(placed, attr.name);
  }
  if (bump_member_count) target->member_count++;
  return out;
}

}  // namespace detail

// Integration with every pending candidate decided. Confirmed pairs enter
// the mapping; everything else is appended under its local name.
inline SchemaMapping integrate(std::vector<GlobalSchema>& globals,
                               const IntegrationProposal& proposal,
                               const std::map<std::string, Decision>& decisions,
                               bool bump_member_count = true) {
  std::map<std::string, MatchStatus> resolved;
  for (const auto& c : proposal.candidates) {
    if (c.status == MatchStatus::Confirmed) {
      resolved[c.local_name] = MatchStatus::Confirmed;
      continue;
    }
    auto it = decisions.find(c.local_name);
    if (it == decisions.end())
      throw DecisionError("no decision for pending candidate '" + c.local_name + "'");
    resolved[c.local_name] =
        it->second == Decision::Confirm ? MatchStatus::Confirmed : MatchStatus::Rejected;
  }
  return detail::integrate_resolved(globals, proposal, resolved, bump_member_count).mapping;
}

struct AsyncIntegration {
  SchemaMapping mapping;
  std::vector<std::string> appended;       // global attribute names added now
  std::vector<MatchCandidate> enqueued;    // pending candidates put up for review
  bool conflict_flagged = false;
};

// Registration-time integration: pending candidates count as matches so the
// space is usable immediately; they are queued for review, and a later
// rejection rewrites the stored mapping. Two locals pending onto the same
// global are resolved first-wins, the loser is placed under its local name
// and both queue entries carry the conflict flag.
inline AsyncIntegration integrate_async(std::vector<GlobalSchema>& globals, MatcherState& state,
                                        const IntegrationProposal& proposal,
                                        bool bump_member_count = true) {
  AsyncIntegration out;
  std::map<std::string, MatchStatus> resolved;
  std::set<std::string> tentative_globals;
  std::set<std::string> conflicted_globals;
  for (const auto& c : proposal.candidates) {
    if (c.status == MatchStatus::Confirmed) {
      resolved[c.local_name] = MatchStatus::Confirmed;
      tentative_globals.insert(c.global_name);
    }
  }
  for (const auto& c : proposal.candidates) {
    if (c.status != MatchStatus::Pending) continue;
    if (tentative_globals.count(c.global_name)) {
      resolved[c.local_name] = MatchStatus::Rejected;  // loses the claim, placed under local name
      conflicted_globals.insert(c.global_name);
      out.conflict_flagged = true;
    } else {
      resolved[c.local_name] = MatchStatus::Confirmed;
      tentative_globals.insert(c.global_name);
    }
  }
  for (const auto& c : proposal.candidates) {
    if (c.status != MatchStatus::Pending) continue;
    bool already = std::any_of(state.review_queue.begin(), state.review_queue.end(),
                               [&](const MatchCandidate& q) { return q.same_pair(c); });
    if (already) continue;
    MatchCandidate queued = c;
    queued.conflict = conflicted_globals.count(c.global_name) > 0;
    state.review_queue.push_back(queued);
    out.enqueued.push_back(std::move(queued));
  }
  auto res = detail::integrate_resolved(globals, proposal, resolved, bump_member_count);
  out.mapping = std::move(res.mapping);
  out.appended = std::move(res.appended);
  return out;
}

// Review-queue dump: `local_name  global_domain.global_name  criterion  score  status`
inline std::string dump_queue_line(const MatchCandidate& c) {
  char score[32];
  snprintf(score, sizeof score, "%.4f", c.score);
  return c.local_name + "\t" + c.global_domain + "." + c.global_name + "\t" +
         to_string(c.criterion) + "\t" + score + "\t" + to_string(c.status);
}

inline MatchCandidate parse_queue_line(const std::string& line) {
  std::istringstream in(line);
  std::string pair, criterion, score, status;
  MatchCandidate c;
  if (!(in >> c.local_name >> pair >> criterion >> score >> status))
    throw CdmsError("bad review-queue line: " + line);
  auto dot = pair.find('.');
  if (dot == std::string::npos) throw CdmsError("bad global reference: " + pair);
  c.global_domain = pair.substr(0, dot);
  c.global_name = pair.substr(dot + 1);
  auto crit = criterion_from_string(criterion);
  if (!crit) throw CdmsError("unknown criterion: " + criterion);
  c.criterion = *crit;
  c.score = std::stod(score);
  if (status == "pending") c.status = MatchStatus::Pending;
  else if (status == "confirmed") c.status = MatchStatus::Confirmed;
  else if (status == "rejected") c.status = MatchStatus::Rejected;
  else throw CdmsError("unknown status: " + status);
  return c;
}

}  // namespace cdms::matcher
