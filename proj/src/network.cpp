#include "flexcap/network.hpp"

#include "csv.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <unordered_map>

namespace flexcap {

namespace fs = std::filesystem;

int NetworkDescription::slack() const {
    for (int k = 0; k < num_buses(); ++k) {
        if (buses[k].type == BusType::Slack) return k;
    }
    throw ValidationError("network has no slack bus");
}

int NetworkDescription::bus_index(const std::string& id) const {
    for (int k = 0; k < num_buses(); ++k) {
        if (buses[k].id == id) return k;
    }
    throw ValidationError("unknown bus id '" + id + "'");
}

void NetworkDescription::validate() const {
    if (buses.empty()) throw ValidationError("network has no buses");
    int slacks = 0;
    std::set<std::string> ids;
    for (const Bus& b : buses) {
        if (!ids.insert(b.id).second) throw ValidationError("duplicate bus id '" + b.id + "'");
        if (b.type == BusType::Slack) ++slacks;
        if (!(b.v_min > 0.0) || !(b.v_max > b.v_min)) {
            throw ValidationError("bus '" + b.id + "': voltage bounds must satisfy 0 < v_min < v_max");
        }
    }
    if (slacks != 1) throw ValidationError("network must have exactly one slack bus, found " + std::to_string(slacks));
    if (!(base_kva > 0.0) || !(base_kv > 0.0)) throw ValidationError("base power and voltage must be positive");

    std::vector<int> parent(buses.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (const Branch& br : branches) {
        if (br.from < 0 || br.to < 0 || br.from >= num_buses() || br.to >= num_buses() || br.from == br.to) {
            throw ValidationError("branch '" + br.id + "': invalid end buses");
        }
        if (!(br.i_max > 0.0)) throw ValidationError("branch '" + br.id + "': ampacity must be positive");
        if (std::abs(br.z) == 0.0 || !std::isfinite(br.z.real()) || !std::isfinite(br.z.imag())) {
            throw ValidationError("branch '" + br.id + "': impedance must be finite and nonzero");
        }
        parent[find(br.from)] = find(br.to);
    }
    const int root = find(0);
    for (int k = 1; k < num_buses(); ++k) {
        if (find(k) != root) throw ValidationError("network is not connected (bus '" + buses[k].id + "')");
    }
}

NetworkDescription load_network(const std::string& header_path) {
    std::ifstream in(header_path);
    if (!in) throw ParseError(header_path, "cannot open file");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(header_path, e.what());
    }
    NetworkDescription net;
    const fs::path dir = fs::path(header_path).parent_path();
    std::string buses_file;
    std::string branches_file;
    try {
        net.base_kva = header.at("base_kva").get<double>();
        net.base_kv = header.at("base_kv").get<double>();
        buses_file = (dir / header.value("buses", "buses.csv")).string();
        branches_file = (dir / header.value("branches", "branches.csv")).string();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(header_path, e.what());
    }

    const csv::Table bt = csv::read(buses_file);
    const int c_id = bt.require_column("id");
    const int c_type = bt.require_column("type");
    const int c_vmin = bt.require_column("vmin");
    const int c_vmax = bt.require_column("vmax");
    std::unordered_map<std::string, int> index;
    for (const csv::Row& r : bt.rows) {
        Bus b;
        b.id = r.cells[c_id];
        const std::string& type = r.cells[c_type];
        if (type == "slack") {
            b.type = BusType::Slack;
        } else if (type == "PQ" || type == "pq") {
            b.type = BusType::PQ;
        } else {
            throw ParseError(buses_file, r.line, "bus type must be slack or PQ, got '" + type + "'");
        }
        b.v_min = csv::to_double(bt, r, c_vmin);
        b.v_max = csv::to_double(bt, r, c_vmax);
        if (!index.emplace(b.id, net.num_buses()).second) {
            throw ParseError(buses_file, r.line, "duplicate bus id '" + b.id + "'");
        }
        net.buses.push_back(b);
    }

    const csv::Table lt = csv::read(branches_file);
    const int l_id = lt.require_column("id");
    const int l_from = lt.require_column("from");
    const int l_to = lt.require_column("to");
    const int l_r = lt.require_column("r_pu");
    const int l_x = lt.require_column("x_pu");
    const int l_imax = lt.require_column("imax_pu");
    std::set<std::string> branch_ids;
    for (const csv::Row& r : lt.rows) {
        Branch br;
        br.id = r.cells[l_id];
        if (!branch_ids.insert(br.id).second) {
            throw ParseError(branches_file, r.line, "duplicate branch id '" + br.id + "'");
        }
        for (auto [col, dst] : {std::pair{l_from, &br.from}, std::pair{l_to, &br.to}}) {
            const auto it = index.find(r.cells[col]);
            if (it == index.end()) throw ParseError(branches_file, r.line, "unknown bus '" + r.cells[col] + "'");
            *dst = it->second;
        }
        br.z = Complex(csv::to_double(lt, r, l_r), csv::to_double(lt, r, l_x));
        br.i_max = csv::to_double(lt, r, l_imax);
        net.branches.push_back(br);
    }
    net.validate();
    return net;
}

void save_network(const NetworkDescription& net, const std::string& header_path) {
    const fs::path hp(header_path);
    const std::string stem = hp.stem().string();
    const std::string buses_name = stem + "_buses.csv";
    const std::string branches_name = stem + "_branches.csv";
    {
        std::ofstream out(hp);
        nlohmann::json h = {{"base_kva", net.base_kva}, {"base_kv", net.base_kv},
                            {"buses", buses_name}, {"branches", branches_name}};
        out << h.dump(2) << "\n";
    }
    std::ofstream bo(hp.parent_path() / buses_name);
    bo << std::setprecision(17) << "id,type,vmin,vmax\n";
    for (const Bus& b : net.buses) {
        bo << b.id << "," << (b.type == BusType::Slack ? "slack" : "PQ") << "," << b.v_min << "," << b.v_max << "\n";
    }
    std::ofstream lo(hp.parent_path() / branches_name);
    lo << std::setprecision(17) << "id,from,to,r_pu,x_pu,imax_pu\n";
    for (const Branch& br : net.branches) {
        lo << br.id << "," << net.buses[br.from].id << "," << net.buses[br.to].id << "," << br.z.real() << ","
           << br.z.imag() << "," << br.i_max << "\n";
    }
}

}  // namespace flexcap
