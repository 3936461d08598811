#include "defined/csv.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace defined {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::string basename_no_ext(const std::string& path) {
  std::size_t slash = path.find_last_of("/\\");
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  if (base.size() > 4 && base.substr(base.size() - 4) == ".csv")
    base = base.substr(0, base.size() - 4);
  return base;
}

}  // namespace

void write_curve_csv(const std::string& path, const EvalCurve& curve) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "length,ser,stderr\n";
  os.precision(12);
  for (const auto& p : curve.points)
    os << p.length << "," << p.ser << "," << p.std_error << "\n";
  if (curve.gain) os << "gain_df," << *curve.gain << ",\n";
  if (!os) throw std::runtime_error("write failed: " + path);
}

EvalCurve read_curve_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) || split_commas(line)[0] != "length")
    throw std::runtime_error("curve csv: bad header in " + path);
  EvalCurve curve;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto fields = split_commas(line);
    if (fields[0] == "gain_df") {
      curve.gain = std::stod(fields.at(1));
      continue;
    }
    if (fields.size() < 3) throw std::runtime_error("curve csv: short row in " + path);
    CurvePoint p;
    p.length = std::stoi(fields[0]);
    p.ser = std::stod(fields[1]);
    p.std_error = std::stod(fields[2]);
    curve.points.push_back(p);
  }
  return curve;
}

void write_compare_csv(const std::string& out_path, const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw std::invalid_argument("compare: no input curves");
  struct Col {
    std::string name;
    std::map<int, CurvePoint> by_length;
  };
  std::vector<Col> cols;
  std::map<int, bool> lengths;
  for (const auto& in : inputs) {
    Col col;
    col.name = basename_no_ext(in);
    for (const auto& p : read_curve_csv(in).points) {
      col.by_length[p.length] = p;
      lengths[p.length] = true;
    }
    cols.push_back(std::move(col));
  }
  std::ofstream os(out_path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + out_path);
  os << "length";
  for (const auto& c : cols) os << "," << c.name << "_ser," << c.name << "_stderr";
  os << "\n";
  os.precision(12);
  for (const auto& [len, _] : lengths) {
    os << len;
    for (const auto& c : cols) {
      auto it = c.by_length.find(len);
      if (it == c.by_length.end())
        os << ",,";
      else
        os << "," << it->second.ser << "," << it->second.std_error;
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("write failed: " + out_path);
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "step,phase,loss\n";
  os.precision(12);
  for (const auto& r : trace) os << r.step << "," << r.phase << "," << r.loss << "\n";
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace defined
