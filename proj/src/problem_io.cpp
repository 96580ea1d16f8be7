#include "pdmm/problem_io.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace pdmm {

namespace {

struct Token {
  std::string text;
  int line = 0;
};

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> tokens;
  int line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == '{' || c == '}') {
      tokens.push_back({std::string(1, c), line});
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) &&
             text[j] != '{' && text[j] != '}' && text[j] != '#') {
        ++j;
      }
      tokens.push_back({text.substr(i, j - i), line});
      i = j;
    }
  }
  return tokens;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  ProblemGraph parse() {
    ProblemGraph g;
    std::vector<std::pair<int, Node>> nodes;
    while (!done()) {
      const Token section = next();
      if (section.text == "nodes") {
        expect("{");
        while (peek() != "}") {
          expect("node");
          nodes.push_back(parse_node());
        }
        expect("}");
      } else if (section.text == "edges") {
        expect("{");
        while (peek() != "}") {
          expect("edge");
          g.edges.push_back(parse_edge());
        }
        expect("}");
      } else if (section.text == "node_constraints") {
        expect("{");
        while (peek() != "}") {
          expect("constraint");
          g.node_constraints.push_back(parse_node_constraint());
        }
        expect("}");
      } else {
        fail(section, "unknown section '" + section.text + "'");
      }
    }

    if (nodes.empty()) fail_eof("file defines no nodes");
    g.nodes.resize(nodes.size());
    std::vector<char> filled(nodes.size(), 0);
    for (auto& [id, node] : nodes) {
      if (id < 0 || id >= static_cast<int>(nodes.size())) {
        fail_eof("node id " + std::to_string(id) + " outside 0.." +
                 std::to_string(nodes.size() - 1));
      }
      if (filled[static_cast<std::size_t>(id)]) {
        fail_eof("node id " + std::to_string(id) + " defined twice");
      }
      filled[static_cast<std::size_t>(id)] = 1;
      g.nodes[static_cast<std::size_t>(id)] = std::move(node);
    }
    return g;
  }

 private:
  bool done() const { return at_ >= tokens_.size(); }

  const Token& next() {
    if (done()) throw ParseError("unexpected end of file");
    return tokens_[at_++];
  }

  std::string peek() const {
    if (done()) throw ParseError("unexpected end of file");
    return tokens_[at_].text;
  }

  void expect(const std::string& word) {
    const Token& t = next();
    if (t.text != word) fail(t, "expected '" + word + "', found '" + t.text + "'");
  }

  [[noreturn]] void fail(const Token& t, const std::string& message) const {
    throw ParseError("line " + std::to_string(t.line) + ": " + message);
  }

  [[noreturn]] void fail_eof(const std::string& message) const {
    throw ParseError(message);
  }

  int parse_int() {
    const Token& t = next();
    char* end = nullptr;
    const long v = std::strtol(t.text.c_str(), &end, 10);
    if (end == t.text.c_str() || *end != '\0') {
      fail(t, "expected an integer, found '" + t.text + "'");
    }
    return static_cast<int>(v);
  }

  double parse_double() {
    const Token& t = next();
    char* end = nullptr;
    const double v = std::strtod(t.text.c_str(), &end);
    if (end == t.text.c_str() || *end != '\0') {
      fail(t, "expected a number, found '" + t.text + "'");
    }
    return v;
  }

  Matrix parse_matrix() {
    expect("{");
    expect("rows");
    const int rows = parse_int();
    expect("cols");
    const int cols = parse_int();
    if (rows < 0 || cols < 0) fail_eof("matrix shape must be non-negative");
    expect("data");
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) m(r, c) = parse_double();
    }
    expect("}");
    return m;
  }

  Vector parse_vector() {
    expect("{");
    expect("size");
    const int size = parse_int();
    if (size < 0) fail_eof("vector size must be non-negative");
    expect("data");
    Vector v(size);
    for (int i = 0; i < size; ++i) v[i] = parse_double();
    expect("}");
    return v;
  }

  std::vector<ConstraintKind> parse_kinds() {
    expect("{");
    std::vector<ConstraintKind> kinds;
    while (peek() != "}") {
      const Token& t = next();
      if (t.text == "eq") {
        kinds.push_back(ConstraintKind::Equality);
      } else if (t.text == "ineq") {
        kinds.push_back(ConstraintKind::Inequality);
      } else {
        fail(t, "constraint kind must be 'eq' or 'ineq', found '" + t.text + "'");
      }
    }
    expect("}");
    return kinds;
  }

  LocalObjective parse_objective() {
    expect("{");
    expect("kind");
    const Token& kind = next();
    LocalObjective objective;
    if (kind.text == "quadratic") {
      expect("Q");
      Matrix Q = parse_matrix();
      expect("q");
      Vector q = parse_vector();
      objective = QuadraticObjective{std::move(Q), std::move(q)};
    } else if (kind.text == "linear") {
      expect("g");
      objective = LinearObjective{parse_vector()};
    } else {
      fail(kind, "objective kind must be 'quadratic' or 'linear'");
    }
    expect("}");
    return objective;
  }

  std::pair<int, Node> parse_node() {
    expect("{");
    int id = -1;
    Node node;
    bool has_id = false, has_dim = false, has_objective = false;
    while (peek() != "}") {
      const Token key = next();
      if (key.text == "id") {
        id = parse_int();
        has_id = true;
      } else if (key.text == "dim") {
        node.dim = parse_int();
        has_dim = true;
      } else if (key.text == "objective") {
        node.objective = parse_objective();
        has_objective = true;
      } else {
        fail(key, "unknown node key '" + key.text + "'");
      }
    }
    expect("}");
    if (!has_id || !has_dim || !has_objective) {
      fail_eof("node needs id, dim and objective");
    }
    return {id, std::move(node)};
  }

  EdgeConstraintBlock parse_edge() {
    expect("{");
    EdgeConstraintBlock e;
    bool has_i = false, has_j = false, has_aij = false, has_aji = false,
         has_b = false, has_kinds = false;
    while (peek() != "}") {
      const Token key = next();
      if (key.text == "i") {
        e.i = parse_int();
        has_i = true;
      } else if (key.text == "j") {
        e.j = parse_int();
        has_j = true;
      } else if (key.text == "A_ij") {
        e.A_ij = parse_matrix();
        has_aij = true;
      } else if (key.text == "A_ji") {
        e.A_ji = parse_matrix();
        has_aji = true;
      } else if (key.text == "b") {
        e.b = parse_vector();
        has_b = true;
      } else if (key.text == "kinds") {
        e.kind = parse_kinds();
        has_kinds = true;
      } else {
        fail(key, "unknown edge key '" + key.text + "'");
      }
    }
    expect("}");
    if (!has_i || !has_j || !has_aij || !has_aji || !has_b || !has_kinds) {
      fail_eof("edge needs i, j, A_ij, A_ji, b and kinds");
    }
    return e;
  }

  NodeConstraintBlock parse_node_constraint() {
    expect("{");
    NodeConstraintBlock c;
    bool has_i = false, has_a = false, has_b = false, has_kinds = false;
    while (peek() != "}") {
      const Token key = next();
      if (key.text == "i") {
        c.i = parse_int();
        has_i = true;
      } else if (key.text == "A") {
        c.A = parse_matrix();
        has_a = true;
      } else if (key.text == "b") {
        c.b = parse_vector();
        has_b = true;
      } else if (key.text == "kinds") {
        c.kind = parse_kinds();
        has_kinds = true;
      } else {
        fail(key, "unknown constraint key '" + key.text + "'");
      }
    }
    expect("}");
    if (!has_i || !has_a || !has_b || !has_kinds) {
      fail_eof("constraint needs i, A, b and kinds");
    }
    return c;
  }

  std::vector<Token> tokens_;
  std::size_t at_ = 0;
};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix(std::string& out, const char* key, const Matrix& m,
                  const char* indent) {
  out += indent;
  out += key;
  out += " { rows " + std::to_string(m.rows()) + " cols " + std::to_string(m.cols()) +
         " data";
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      out += ' ';
      out += format_double(m(r, c));
    }
  }
  out += " }\n";
}

void write_vector(std::string& out, const char* key, const Vector& v,
                  const char* indent) {
  out += indent;
  out += key;
  out += " { size " + std::to_string(v.size()) + " data";
  for (Index i = 0; i < v.size(); ++i) {
    out += ' ';
    out += format_double(v[i]);
  }
  out += " }\n";
}

void write_kinds(std::string& out, const std::vector<ConstraintKind>& kinds,
                 const char* indent) {
  out += indent;
  out += "kinds {";
  for (const auto k : kinds) {
    out += k == ConstraintKind::Equality ? " eq" : " ineq";
  }
  out += " }\n";
}

}  // namespace

ProblemGraph parse_problem(const std::string& text) {
  Parser parser(tokenize(text));
  return build_problem(parser.parse());
}

ProblemGraph load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_problem(buffer.str());
}

std::string serialize_problem(const ProblemGraph& g) {
  std::string out;
  out += "nodes {\n";
  for (int i = 0; i < g.num_nodes(); ++i) {
    const Node& node = g.nodes[static_cast<std::size_t>(i)];
    out += "  node {\n    id " + std::to_string(i) + "\n    dim " +
           std::to_string(node.dim) + "\n    objective {\n";
    if (const auto* quad = std::get_if<QuadraticObjective>(&node.objective)) {
      out += "      kind quadratic\n";
      write_matrix(out, "Q", quad->Q, "      ");
      write_vector(out, "q", quad->q, "      ");
    } else {
      out += "      kind linear\n";
      write_vector(out, "g", std::get<LinearObjective>(node.objective).g, "      ");
    }
    out += "    }\n  }\n";
  }
  out += "}\n";

  out += "edges {\n";
  for (const auto& e : g.edges) {
    out += "  edge {\n    i " + std::to_string(e.i) + "\n    j " +
           std::to_string(e.j) + "\n";
    write_matrix(out, "A_ij", e.A_ij, "    ");
    write_matrix(out, "A_ji", e.A_ji, "    ");
    write_vector(out, "b", e.b, "    ");
    write_kinds(out, e.kind, "    ");
    out += "  }\n";
  }
  out += "}\n";

  if (!g.node_constraints.empty()) {
    out += "node_constraints {\n";
    for (const auto& c : g.node_constraints) {
      out += "  constraint {\n    i " + std::to_string(c.i) + "\n";
      write_matrix(out, "A", c.A, "    ");
      write_vector(out, "b", c.b, "    ");
      write_kinds(out, c.kind, "    ");
      out += "  }\n";
    }
    out += "}\n";
  }
  return out;
}

void save_problem(const ProblemGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << serialize_problem(g);
}

bool graphs_equal(const ProblemGraph& a, const ProblemGraph& b) {
  if (a.num_nodes() != b.num_nodes() || a.edges.size() != b.edges.size() ||
      a.node_constraints.size() != b.node_constraints.size()) {
    return false;
  }
  const auto same_matrix = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && (x.array() == y.array()).all();
  };
  const auto same_vector = [](const Vector& x, const Vector& y) {
    return x.size() == y.size() && (x.array() == y.array()).all();
  };
  for (int i = 0; i < a.num_nodes(); ++i) {
    const Node& na = a.nodes[static_cast<std::size_t>(i)];
    const Node& nb = b.nodes[static_cast<std::size_t>(i)];
    if (na.dim != nb.dim || na.objective.index() != nb.objective.index()) return false;
    if (const auto* qa = std::get_if<QuadraticObjective>(&na.objective)) {
      const auto& qb = std::get<QuadraticObjective>(nb.objective);
      if (!same_matrix(qa->Q, qb.Q) || !same_vector(qa->q, qb.q)) return false;
    } else if (!same_vector(std::get<LinearObjective>(na.objective).g,
                            std::get<LinearObjective>(nb.objective).g)) {
      return false;
    }
  }
  for (std::size_t e = 0; e < a.edges.size(); ++e) {
    const auto& ea = a.edges[e];
    const auto& eb = b.edges[e];
    if (ea.i != eb.i || ea.j != eb.j || ea.kind != eb.kind ||
        !same_matrix(ea.A_ij, eb.A_ij) || !same_matrix(ea.A_ji, eb.A_ji) ||
        !same_vector(ea.b, eb.b)) {
      return false;
    }
  }
  for (std::size_t c = 0; c < a.node_constraints.size(); ++c) {
    const auto& ca = a.node_constraints[c];
    const auto& cb = b.node_constraints[c];
    if (ca.i != cb.i || ca.kind != cb.kind || !same_matrix(ca.A, cb.A) ||
        !same_vector(ca.b, cb.b)) {
      return false;
    }
  }
  return true;
}

}  // namespace pdmm
