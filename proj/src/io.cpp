#include "viscoflow/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace viscoflow::io {

namespace {
constexpr char kStatesMagic[8] = {'V', 'F', 'S', 'T', 'A', 'T', 'E', '1'};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv64(const std::string& bytes) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

std::uint64_t fnv64_file(const std::string& path) { return fnv64(read_text(path)); }

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string ledger_csv(const TrajectoryRecord& rec) {
  std::ostringstream out;
  out << "step,elastic_W,second_grade_P,dissipation_R,inertial,force_work,total\n";
  for (const StepLedger& led : rec.ledger) {
    const EnergyBreakdown& b = led.breakdown;
    out << led.step << ',' << format_double(b.elastic_W) << ',' << format_double(b.second_grade_P)
        << ',' << format_double(b.dissipation_R) << ',' << format_double(b.inertial) << ','
        << format_double(b.force_work) << ',' << format_double(b.total) << '\n';
  }
  return out.str();
}

std::string diagnostics_csv(const TrajectoryRecord& rec,
                            const std::vector<FenchelEntry>& fenchel) {
  std::ostringstream out;
  out << "step,energy,rhs_simplified,slack_simplified,slack_refined,interp_kinetic,"
         "interp_dual,fenchel_pairing,fenchel_residual,min_det,grad_norm,newton_iters,"
         "w_norm2,v_norm2\n";
  const double nanv = std::nan("");
  for (std::size_t i = 0; i < rec.ledger.size(); ++i) {
    const StepLedger& led = rec.ledger[i];
    const double pairing = i < fenchel.size() ? fenchel[i].pairing : nanv;
    const double residual = i < fenchel.size() ? fenchel[i].residual : nanv;
    out << led.step << ',' << format_double(led.energy) << ','
        << format_double(led.rhs_simplified) << ',' << format_double(led.slack_simplified) << ','
        << format_double(led.refined_available ? led.slack_refined : nanv) << ','
        << format_double(led.refined_available ? led.interp_kinetic : nanv) << ','
        << format_double(led.refined_available ? led.interp_dual : nanv) << ','
        << format_double(pairing) << ',' << format_double(residual) << ','
        << format_double(led.min_det) << ',' << format_double(led.grad_norm) << ','
        << led.newton_iters << ',' << format_double(led.w_lumped_norm2) << ','
        << format_double(led.v_lumped_norm2) << '\n';
  }
  return out.str();
}

std::string rates_csv(const std::vector<double>& params, const std::vector<double>& errors,
                      const RateReport* rates) {
  std::ostringstream out;
  out << "param,error,pair_slope,fitted_slope\n";
  for (std::size_t i = 0; i < params.size(); ++i) {
    out << format_double(params[i]) << ',' << format_double(errors[i]) << ',';
    if (rates && i < rates->pair_slopes.size()) out << format_double(rates->pair_slopes[i]);
    out << ',';
    if (rates) out << format_double(rates->fitted_slope);
    out << '\n';
  }
  return out.str();
}

std::string errors_csv(const std::vector<double>& params, const std::vector<double>& errors) {
  std::ostringstream out;
  out << "level,param,error\n";
  for (std::size_t i = 0; i < params.size(); ++i)
    out << i << ',' << format_double(params[i]) << ',' << format_double(errors[i]) << '\n';
  return out.str();
}

void write_states_bin(const std::string& path, const TrajectoryRecord& rec) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write(kStatesMagic, sizeof(kStatesMagic));
  const std::int32_t role =
      static_cast<std::int32_t>(rec.linear ? FieldRole::displacement : FieldRole::deformation);
  for (std::size_t i = 0; i < rec.states.size(); ++i) {
    const Field& f = rec.states[i];
    const std::int32_t header[4] = {static_cast<std::int32_t>(f.grid->dim()),
                                    static_cast<std::int32_t>(f.grid->n()), role,
                                    static_cast<std::int32_t>(i)};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(f.data.data()),
              static_cast<std::streamsize>(sizeof(double) * f.data.size()));
  }
}

std::vector<Field> read_states_bin(const std::string& path, std::shared_ptr<const Grid> grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kStatesMagic, sizeof(magic)) != 0)
    throw std::runtime_error("'" + path + "' is not a state dump");

  std::vector<Field> states;
  const std::size_t len = static_cast<std::size_t>(grid->node_count()) * grid->dim();
  while (true) {
    std::int32_t header[4];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in) break;
    if (header[0] != grid->dim() || header[1] != grid->n())
      throw std::runtime_error("state dump does not match the configured grid");
    Field f(grid);
    in.read(reinterpret_cast<char*>(f.data.data()),
            static_cast<std::streamsize>(sizeof(double) * len));
    if (!in) throw std::runtime_error("truncated state dump");
    if (header[3] != static_cast<std::int32_t>(states.size()))
      throw std::runtime_error("state dump sequence indices out of order");
    states.push_back(std::move(f));
  }
  return states;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV");
  std::istringstream head(line);
  std::string cell;
  while (std::getline(head, cell, ',')) table.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::vector<double> vals;
    while (std::getline(row, cell, ',')) {
      if (cell.empty()) {
        vals.push_back(std::nan(""));
      } else {
        std::size_t pos = 0;
        vals.push_back(std::stod(cell, &pos));
      }
    }
    if (vals.size() != table.columns.size()) throw std::runtime_error("ragged CSV row");
    table.rows.push_back(std::move(vals));
  }
  return table;
}

}  // namespace viscoflow::io
