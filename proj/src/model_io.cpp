#include "cascade/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace cascade {

namespace {

struct Token {
  std::string text;
  int column = 0;  // 1-based character offset
};

struct Line {
  int number = 0;
  std::vector<Token> tokens;
};

std::vector<Line> tokenize(const std::string& text) {
  std::vector<Line> lines;
  std::istringstream in(text);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    Line line;
    line.number = number;
    std::size_t i = 0;
    while (i < raw.size()) {
      if (std::isspace(static_cast<unsigned char>(raw[i]))) {
        ++i;
        continue;
      }
      std::size_t start = i;
      while (i < raw.size() && !std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
      line.tokens.push_back({raw.substr(start, i - start), static_cast<int>(start) + 1});
    }
    if (!line.tokens.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

class Reader {
 public:
  explicit Reader(std::vector<Line> lines) : lines_(std::move(lines)) {}

  bool done() const { return pos_ >= lines_.size(); }
  const Line& peek() const { return lines_[pos_]; }
  const Line& take() { return lines_[pos_++]; }

  double number(const Token& tok, int line) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok.text, &used);
      if (used != tok.text.size()) throw std::invalid_argument(tok.text);
      return v;
    } catch (const std::exception&) {
      throw ParseError("expected a number, got '" + tok.text + "'", line, tok.column);
    }
  }

  long long integer(const Token& tok, int line) const {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(tok.text, &used);
      if (used != tok.text.size()) throw std::invalid_argument(tok.text);
      return v;
    } catch (const std::exception&) {
      throw ParseError("expected an integer, got '" + tok.text + "'", line, tok.column);
    }
  }

  // Reads `rows` subsequent lines of exactly `cols` numbers each.
  Matrix matrix(int rows, int cols, const std::string& what) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      if (done())
        throw ParseError("unexpected end of file inside " + what,
                         lines_.empty() ? 1 : lines_.back().number, 1);
      const Line& line = take();
      if (static_cast<int>(line.tokens.size()) != cols)
        throw ParseError(what + ": expected " + std::to_string(cols) +
                             " numbers, got " + std::to_string(line.tokens.size()),
                         line.number, line.tokens.front().column);
      for (int j = 0; j < cols; ++j)
        m(i, j) = number(line.tokens[static_cast<std::size_t>(j)], line.number);
    }
    return m;
  }

 private:
  std::vector<Line> lines_;
  std::size_t pos_ = 0;
};

std::string rest_of_line(const Line& line) {
  std::string out;
  for (std::size_t i = 1; i < line.tokens.size(); ++i) {
    if (i > 1) out += ' ';
    out += line.tokens[i].text;
  }
  return out;
}

void print_matrix(std::string& out, const Matrix& m) {
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ' ';
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out += buf;
    }
    out += '\n';
  }
}

}  // namespace

ZooEntry parse_model_file(const std::string& text) {
  Reader reader(tokenize(text));
  if (reader.done()) throw ParseError("empty model file", 0, 0);

  ZooEntry entry;
  auto& model = entry.model;
  bool have_dims = false, have_C = false, have_A0 = false, have_bounds = false;
  std::vector<char> have_A, have_B;
  bool have_cost = false;
  CostSpec cost;

  while (!reader.done()) {
    const Line line = reader.take();
    const Token& key = line.tokens.front();
    auto need_dims = [&]() {
      if (!have_dims)
        throw ParseError("section '" + key.text + "' before dims", line.number,
                         key.column);
    };

    if (key.text == "dims") {
      if (line.tokens.size() != 4)
        throw ParseError("dims needs: r n p", line.number, key.column);
      model.r = static_cast<int>(reader.integer(line.tokens[1], line.number));
      model.n = static_cast<int>(reader.integer(line.tokens[2], line.number));
      model.p = static_cast<int>(reader.integer(line.tokens[3], line.number));
      if (model.r <= 0 || model.n <= 0 || model.p < 0)
        throw ParseError("dims must satisfy r > 0, n > 0, p >= 0", line.number,
                         key.column);
      model.A.assign(static_cast<std::size_t>(model.r), Matrix());
      model.B.assign(static_cast<std::size_t>(model.p),
                     std::vector<Matrix>(static_cast<std::size_t>(model.r)));
      have_A.assign(static_cast<std::size_t>(model.r), 0);
      have_B.assign(static_cast<std::size_t>(model.p * model.r), 0);
      model.lo = Vector::Zero(model.p);
      model.hi = Vector::Zero(model.p);
      have_dims = true;
    } else if (key.text == "name") {
      entry.name = rest_of_line(line);
    } else if (key.text == "description") {
      entry.description = rest_of_line(line);
    } else if (key.text == "bounds") {
      need_dims();
      const Matrix b = reader.matrix(model.p, 2, "bounds");
      model.lo = b.col(0);
      model.hi = b.col(1);
      have_bounds = true;
    } else if (key.text == "C") {
      need_dims();
      model.C = reader.matrix(model.r, model.r, "C");
      have_C = true;
    } else if (key.text == "A0") {
      need_dims();
      model.A0 = reader.matrix(model.n, model.n, "A0");
      have_A0 = true;
    } else if (key.text == "A") {
      need_dims();
      if (line.tokens.size() != 2)
        throw ParseError("A needs a driver index", line.number, key.column);
      const long long z = reader.integer(line.tokens[1], line.number);
      if (z < 0 || z >= model.r)
        throw ParseError("A index outside [0, r)", line.number,
                         line.tokens[1].column);
      model.A[static_cast<std::size_t>(z)] =
          reader.matrix(model.n, model.n, "A " + std::to_string(z));
      have_A[static_cast<std::size_t>(z)] = 1;
    } else if (key.text == "B") {
      need_dims();
      if (line.tokens.size() != 3)
        throw ParseError("B needs a control index and a driver index",
                         line.number, key.column);
      const long long j = reader.integer(line.tokens[1], line.number);
      const long long z = reader.integer(line.tokens[2], line.number);
      if (j < 0 || j >= model.p)
        throw ParseError("B control index outside [0, p)", line.number,
                         line.tokens[1].column);
      if (z < 0 || z >= model.r)
        throw ParseError("B driver index outside [0, r)", line.number,
                         line.tokens[2].column);
      model.B[static_cast<std::size_t>(j)][static_cast<std::size_t>(z)] =
          reader.matrix(model.n, model.n,
                        "B " + std::to_string(j) + " " + std::to_string(z));
      have_B[static_cast<std::size_t>(j * model.r + z)] = 1;
    } else if (key.text == "V") {
      need_dims();
      entry.V = reader.matrix(model.n, model.r, "V");
    } else if (key.text == "cost") {
      need_dims();
      cost = zero_cost(model.r, model.n);
      have_cost = true;
    } else if (key.text == "L") {
      need_dims();
      if (!have_cost) throw ParseError("L outside a cost block", line.number, key.column);
      cost.L = reader.matrix(model.n, model.r, "L");
    } else if (key.text == "Phi") {
      need_dims();
      if (!have_cost) throw ParseError("Phi outside a cost block", line.number, key.column);
      cost.Phi = reader.matrix(model.n, model.r, "Phi");
    } else if (key.text == "psi") {
      if (!have_cost || line.tokens.size() != 2)
        throw ParseError("psi needs a cost block and a kind", line.number, key.column);
      if (line.tokens[1].text == "zero") cost.psi = CostSpec::Psi::Zero;
      else if (line.tokens[1].text == "quad") cost.psi = CostSpec::Psi::Quadratic;
      else
        throw ParseError("psi kind must be zero or quad", line.number,
                         line.tokens[1].column);
    } else if (key.text == "alpha") {
      if (!have_cost || line.tokens.size() != 2)
        throw ParseError("alpha needs a cost block and a value", line.number, key.column);
      cost.alpha = reader.number(line.tokens[1], line.number);
    } else if (key.text == "flags") {
      for (std::size_t i = 1; i < line.tokens.size(); ++i) {
        if (line.tokens[i].text == "self_financing") entry.self_financing = true;
        else
          throw ParseError("unknown flag '" + line.tokens[i].text + "'",
                           line.number, line.tokens[i].column);
      }
    } else {
      throw ParseError("unknown section '" + key.text + "'", line.number, key.column);
    }
  }

  if (!have_dims) throw ParseError("missing dims section", 0, 0);
  if (!have_C) throw ParseError("missing C section", 0, 0);
  if (!have_A0) throw ParseError("missing A0 section", 0, 0);
  if (model.p > 0 && !have_bounds) throw ParseError("missing bounds section", 0, 0);
  for (int z = 0; z < model.r; ++z)
    if (!have_A[static_cast<std::size_t>(z)])
      throw ParseError("missing section A " + std::to_string(z), 0, 0);
  for (int j = 0; j < model.p; ++j)
    for (int z = 0; z < model.r; ++z)
      if (!have_B[static_cast<std::size_t>(j * model.r + z)])
        throw ParseError("missing section B " + std::to_string(j) + " " +
                             std::to_string(z), 0, 0);

  validate_model(model);
  if (have_cost) entry.cost = cost;
  return entry;
}

ZooEntry load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path + "'", 0, 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_file(buf.str());
}

std::string export_model_file(const ZooEntry& entry) {
  const auto& model = entry.model;
  std::string out;
  if (!entry.name.empty()) out += "name " + entry.name + "\n";
  if (!entry.description.empty()) out += "description " + entry.description + "\n";
  out += "dims " + std::to_string(model.r) + " " + std::to_string(model.n) +
         " " + std::to_string(model.p) + "\n";
  if (model.p > 0) {
    out += "bounds\n";
    Matrix b(model.p, 2);
    b.col(0) = model.lo;
    b.col(1) = model.hi;
    print_matrix(out, b);
  }
  out += "C\n";
  print_matrix(out, model.C);
  out += "A0\n";
  print_matrix(out, model.A0);
  for (int z = 0; z < model.r; ++z) {
    out += "A " + std::to_string(z) + "\n";
    print_matrix(out, model.A[static_cast<std::size_t>(z)]);
  }
  for (int j = 0; j < model.p; ++j)
    for (int z = 0; z < model.r; ++z) {
      out += "B " + std::to_string(j) + " " + std::to_string(z) + "\n";
      print_matrix(out, model.B[static_cast<std::size_t>(j)][static_cast<std::size_t>(z)]);
    }
  if (entry.V) {
    out += "V\n";
    print_matrix(out, *entry.V);
  }
  if (entry.self_financing) out += "flags self_financing\n";
  if (entry.cost) {
    const auto& cost = *entry.cost;
    if (cost.psi == CostSpec::Psi::Custom)
      throw BadKind("export: Custom psi has no text form");
    if (cost.L_t)
      throw BadKind("export: time-varying L has no text form");
    out += "cost\n";
    out += "L\n";
    print_matrix(out, cost.L);
    out += "Phi\n";
    print_matrix(out, cost.Phi);
    out += std::string("psi ") +
           (cost.psi == CostSpec::Psi::Quadratic ? "quad" : "zero") + "\n";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", cost.alpha);
    out += std::string("alpha ") + buf + "\n";
  }
  return out;
}

void save_model_file(const ZooEntry& entry, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write model file '" + path + "'", 0, 0);
  out << export_model_file(entry);
}

}  // namespace cascade
