#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cdms/cql.hpp"

using namespace cdms;
using namespace cdms::cql;

namespace {

std::vector<GlobalSchema> seeded_globals() {
  GlobalSchema person{"PERSON",
                      {{"name", Kind::Text},
                       {"location", Kind::Text},
                       {"friend_list", Kind::TextList},
                       {"age", Kind::Number}},
                      0};
  GlobalSchema office{"OFFICE",
                      {{"location", Kind::Text},
                       {"occupancy", Kind::Number},
                       {"isVacant", Kind::Boolean, /*is_event=*/true}},
                      0};
  return {person, office};
}

}  // namespace

TEST_CASE("data collection query parses to the expected AST") {
  auto ast = parse(R"(SELECT friend_list FROM PERSON WHERE name = "Keith")");
  CHECK(ast.kind == QueryKind::Select);
  CHECK_FALSE(ast.continuous);
  CHECK(ast.projection == std::vector<std::string>{"friend_list"});
  CHECK(ast.domain == "PERSON");
  REQUIRE(ast.predicate.atoms.size() == 1);
  CHECK(ast.predicate.atoms[0] ==
        PredicateAtom{"name", CompareOp::Eq, AttributeValue::text("Keith")});
  CHECK_FALSE(ast.sample_period.has_value());
  CHECK_FALSE(ast.lifetime.has_value());
  CHECK(ast.ttl == 8);
}

TEST_CASE("event subscription query parses with a composite string literal") {
  auto ast = parse(R"(SUBSCRIBE isVacant FROM OFFICE WHERE location = "S14 #06-20, NUS")");
  CHECK(ast.kind == QueryKind::Subscribe);
  CHECK(ast.projection == std::vector<std::string>{"isVacant"});
  CHECK(ast.domain == "OFFICE");
  REQUIRE(ast.predicate.atoms.size() == 1);
  CHECK(ast.predicate.atoms[0].literal == AttributeValue::text("S14 #06-20, NUS"));
}

TEST_CASE("continuous query parses sample period and lifetime") {
  auto ast = parse(
      R"(SELECT CONT location FROM PERSON WHERE name = "Keith" SAMPLE PERIOD 1 min LIFETIME 2 hours)");
  CHECK(ast.kind == QueryKind::Select);
  CHECK(ast.continuous);
  REQUIRE(ast.sample_period.has_value());
  REQUIRE(ast.lifetime.has_value());
  CHECK(ast.sample_period->ms == 60'000);
  CHECK(ast.lifetime->ms == 7'200'000);
}

TEST_CASE("keywords are case-insensitive, identifiers keep case") {
  auto ast = parse(R"(select Friend_List from Person where Name != "k")");
  CHECK(ast.projection == std::vector<std::string>{"Friend_List"});
  CHECK(ast.domain == "Person");
  CHECK(ast.predicate.atoms[0].attribute == "Name");
  CHECK(ast.predicate.atoms[0].op == CompareOp::Ne);
}

TEST_CASE("empty projection is a syntax error with position info") {
  try {
    parse("SELECT FROM PERSON");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 1);
    CHECK(e.column == 8);
    CHECK_FALSE(e.expected.empty());
  }
}

TEST_CASE("malformed inputs never produce a partial AST") {
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("SELECT a"), ParseError);
  CHECK_THROWS_AS(parse("SELECT a FROM"), ParseError);
  CHECK_THROWS_AS(parse("SELECT a FROM P WHERE"), ParseError);
  CHECK_THROWS_AS(parse("SELECT a FROM P WHERE b ="), ParseError);
  CHECK_THROWS_AS(parse("SELECT a FROM P garbage"), ParseError);
  CHECK_THROWS_AS(parse("SELECT a, FROM P"), ParseError);
  CHECK_THROWS_AS(parse(R"(SELECT a FROM P WHERE b = "unterminated)"), ParseError);
  CHECK_THROWS_AS(parse("SELECT CONT a FROM P"), ParseError);          // CONT needs the tail
  CHECK_THROWS_AS(parse("SELECT a FROM P LIFETIME 1 min"), ParseError);  // tail needs CONT
  CHECK_THROWS_AS(parse("SUBSCRIBE a, b FROM P"), ParseError);  // one event per subscription
}

TEST_CASE("string literals support escaped quotes and backslashes") {
  auto ast = parse(R"(SELECT a FROM P WHERE b = "say \"hi\" \\ bye")");
  CHECK(ast.predicate.atoms[0].literal == AttributeValue::text(R"(say "hi" \ bye)"));
}

TEST_CASE("parse_duration handles every documented unit") {
  CHECK(parse_duration("1 min").ms == 60'000);
  CHECK(parse_duration("2 hours").ms == 7'200'000);
  CHECK(parse_duration("0 s").ms == 0);
  CHECK(parse_duration("250 ms").ms == 250);
  CHECK(parse_duration("3 secs").ms == 3000);
  CHECK(parse_duration("5 mins").ms == 300'000);
  CHECK(parse_duration("1 hour").ms == 3'600'000);
  CHECK_THROWS_AS(parse_duration("1 fortnight"), ParseError);
  CHECK_THROWS_AS(parse_duration("1.5 min"), ParseError);
  CHECK_THROWS_AS(parse_duration("-1 min"), ParseError);
}

TEST_CASE("validate accepts the three reference queries against seeded globals") {
  auto globals = seeded_globals();
  CHECK(validate(parse(R"(SELECT friend_list FROM PERSON WHERE name = "Keith")"), globals).empty());
  CHECK(validate(parse(R"(SUBSCRIBE isVacant FROM OFFICE WHERE location = "S14 #06-20, NUS")"),
                 globals)
            .empty());
  CHECK(validate(parse(R"(SELECT CONT location FROM PERSON WHERE name = "Keith" )"
                       R"(SAMPLE PERIOD 1 min LIFETIME 2 hours)"),
                 globals)
            .empty());
}

TEST_CASE("validate reports unknown domain against an empty catalog") {
  auto errs = validate(parse("SELECT friend_list FROM PERSON"), {});
  REQUIRE(errs.size() == 1);
  CHECK(errs[0].code == ValidationError::Code::UnknownDomain);
  CHECK(errs[0].detail == "PERSON");
}

TEST_CASE("validate collects all errors instead of stopping at the first") {
  auto globals = seeded_globals();
  auto errs = validate(parse(R"(SELECT nope, friend_list FROM PERSON WHERE name = 5 AND zap = "x")"),
                       globals);
  REQUIRE(errs.size() == 3);
  CHECK(errs[0].code == ValidationError::Code::UnknownAttribute);  // nope
  CHECK(errs[1].code == ValidationError::Code::KindMismatch);      // name = 5
  CHECK(errs[2].code == ValidationError::Code::UnknownAttribute);  // zap
}

TEST_CASE("validate flags subscriptions on non-event attributes") {
  auto errs = validate(parse("SUBSCRIBE location FROM OFFICE"), seeded_globals());
  REQUIRE(errs.size() == 1);
  CHECK(errs[0].code == ValidationError::Code::SubscribeOnNonEvent);
}

TEST_CASE("operator/kind compatibility matches the comparison contract") {
  // Enumerate every (kind, operator) pair; validate must reject exactly the
  // pairs compare() rejects for same-kind operands.
  auto globals = seeded_globals();
  struct Probe {
    std::string attr;
    std::string literal;
    Kind kind;
  };
  std::vector<Probe> probes = {{"name", "\"x\"", Kind::Text},
                               {"age", "1", Kind::Number},
                               {"isVacant", "true", Kind::Boolean}};
  std::vector<CompareOp> ops = {CompareOp::Eq, CompareOp::Ne, CompareOp::Lt,
                                CompareOp::Le, CompareOp::Gt, CompareOp::Ge};
  auto sample_value = [](Kind k) {
    switch (k) {
      case Kind::Text: return AttributeValue::text("x");
      case Kind::Number: return AttributeValue::number(1);
      case Kind::Boolean: return AttributeValue::boolean(true);
      case Kind::TextList: return AttributeValue::text_list({"x"});
    }
    return AttributeValue::text("");
  };
  for (const auto& p : probes) {
    std::string domain = p.attr == "isVacant" ? "OFFICE" : "PERSON";
    for (auto op : ops) {
      std::string q =
          "SELECT location FROM " + domain + " WHERE " + p.attr + " " + to_string(op) + " " + p.literal;
      bool validator_ok = validate(parse(q), globals).empty();
      bool compare_ok = true;
      try {
        compare(sample_value(p.kind), op, sample_value(p.kind));
      } catch (const CdmsError&) {
        compare_ok = false;
      }
      INFO(q);
      CHECK(validator_ok == compare_ok);
    }
  }
}

TEST_CASE("rewrite_to_local maps names and flags the unmapped") {
  auto ast = parse(R"(SELECT name FROM PERSON WHERE name = "Keith")");
  auto r = rewrite_to_local(ast, {{"name", "personName"}});
  CHECK(r.ast.projection == std::vector<std::string>{"personName"});
  CHECK(r.ast.predicate.atoms[0].attribute == "personName");
  CHECK(r.unmapped.empty());

  auto r2 = rewrite_to_local(parse("SELECT name, age FROM PERSON"), {{"name", "personName"}});
  CHECK(r2.ast.projection == std::vector<std::string>{"personName", "age"});
  CHECK(r2.unmapped == std::set<std::string>{"age"});
}

TEST_CASE("rewrite_to_local with the identity mapping is the identity") {
  auto ast = parse(R"(SELECT name, age FROM PERSON WHERE age > 3)");
  std::map<std::string, std::string> identity = {{"name", "name"}, {"age", "age"}};
  auto r = rewrite_to_local(ast, identity);
  CHECK(r.ast == ast);
  CHECK(r.unmapped.empty());
}

TEST_CASE("rewrite exhaustively over a five-attribute schema, then invert") {
  std::vector<std::string> attrs = {"a1", "a2", "a3", "a4", "a5"};
  std::map<std::string, std::string> mapping = {
      {"a1", "x1"}, {"a2", "a2"}, {"a3", "x3"}};  // a4, a5 unmapped
  QueryAst ast;
  ast.kind = QueryKind::Select;
  ast.domain = "D";
  ast.projection = attrs;
  for (const auto& a : attrs)
    ast.predicate.atoms.push_back({a, CompareOp::Eq, AttributeValue::text("v")});

  auto r = rewrite_to_local(ast, mapping);
  CHECK(r.ast.projection == std::vector<std::string>{"x1", "a2", "x3", "a4", "a5"});
  CHECK(r.unmapped == std::set<std::string>{"a4", "a5"});

  std::map<std::string, std::string> inverse;
  for (const auto& [g, l] : mapping) inverse[l] = g;
  auto back = rewrite_to_local(r.ast, inverse);
  // every mapped name is restored
  CHECK(back.ast.projection == ast.projection);
}

namespace {

QueryAst random_ast(std::mt19937_64& rng) {
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };
  auto ident = [&] {
    static const char* names[] = {"name", "location", "friend_list", "crowdLevel",
                                  "isVacant", "temperature", "x", "a_b_c"};
    return std::string(names[pick(8)]);
  };
  QueryAst ast;
  ast.kind = pick(2) ? QueryKind::Select : QueryKind::Subscribe;
  ast.domain = ident();
  if (ast.kind == QueryKind::Select) {
    int nproj = 1 + pick(3);
    for (int i = 0; i < nproj; ++i) ast.projection.push_back(ident());
  } else {
    ast.projection.push_back(ident());
  }
  int natoms = pick(3);
  for (int i = 0; i < natoms; ++i) {
    PredicateAtom atom;
    atom.attribute = ident();
    atom.op = static_cast<CompareOp>(pick(6));
    switch (pick(3)) {
      case 0: atom.literal = AttributeValue::text("v \"q\" \\ , #1"); break;
      case 1: atom.literal = AttributeValue::number(pick(2) ? 2.5 : -17); break;
      default: atom.literal = AttributeValue::boolean(pick(2) == 0); break;
    }
    ast.predicate.atoms.push_back(std::move(atom));
  }
  auto duration = [&] {
    static const char* units[] = {"ms", "s", "sec", "secs", "min", "mins", "hour", "hours"};
    Duration d;
    d.magnitude = pick(120);
    d.unit = units[pick(8)];
    d.ms = d.magnitude * *detail::unit_factor_ms(d.unit);
    return d;
  };
  if (ast.kind == QueryKind::Select && pick(2)) {
    ast.continuous = true;
    ast.sample_period = duration();
    ast.lifetime = duration();
  } else if (ast.kind == QueryKind::Subscribe && pick(2)) {
    ast.lifetime = duration();
  }
  return ast;
}

}  // namespace

TEST_CASE("parse after render is the identity over a fuzz corpus") {
  std::mt19937_64 rng(20250808);
  for (int i = 0; i < 200; ++i) {
    QueryAst ast = random_ast(rng);
    std::string text = render(ast);
    INFO(text);
    QueryAst again = parse(text);
    CHECK(again == ast);
    CHECK(render(again) == text);  // render ∘ parse is idempotent
  }
}
