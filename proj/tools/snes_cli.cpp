// Command-line front end: `serve` runs the SPARQL endpoint over a simulated
// device network, `run` executes one query, `bench-hash` reproduces the
// hash collision study on a corpus file.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "snes/snes.hpp"

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw snes::Error(snes::Errc::IoError, "cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<snes::Triple> read_triples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw snes::Error(snes::Errc::IoError, "cannot open " + path);
    std::vector<snes::Triple> out;
    std::string line;
    unsigned line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto t = snes::parse_triple_line(line, line_no)) out.push_back(*t);
    }
    return out;
}

struct ServiceArgs {
    std::string topology, data_dir, model, endpoints;
    size_t mtu = snes::kDefaultMtu;
    uint64_t seed = 0;
    uint64_t interval_ms = 1000;
    unsigned lifetime_s = 60;

    void attach(CLI::App* cmd) {
        cmd->add_option("--topology", topology, "topology file: device parent latency_ms")->required();
        cmd->add_option("--data", data_dir, "directory with per-device <id>.nt files")->required();
        cmd->add_option("--model", model, "data model file: node predicate node [type]")->required();
        cmd->add_option("--endpoints", endpoints, "endpoint map file: namespace_prefix url");
        cmd->add_option("--mtu", mtu, "radio MTU in bytes");
        cmd->add_option("--seed", seed, "simulator seed");
        cmd->add_option("--interval", interval_ms, "aggregate interval, simulated ms");
        cmd->add_option("--lifetime", lifetime_s, "query lifetime, seconds");
    }

    std::unique_ptr<snes::Service> make_service() const {
        snes::Topology topo = snes::Topology::parse_text(read_file(topology));
        snes::DataModelGraph graph = snes::DataModelGraph::parse_text(read_file(model));
        snes::EndpointMap emap;
        if (!endpoints.empty()) emap = snes::EndpointMap::parse_text(read_file(endpoints));
        snes::ServiceOptions opt;
        opt.mtu = mtu;
        opt.seed = seed;
        opt.aggregate_interval_ms = interval_ms;
        opt.lifetime_s = uint16_t(lifetime_s);
        auto service = std::make_unique<snes::Service>(topo, graph, emap, opt);
        for (uint32_t dev : topo.device_ids) {
            fs::path file = fs::path(data_dir) / (std::to_string(dev) + ".nt");
            if (fs::exists(file)) service->load_device_triples(dev, read_triples(file.string()));
        }
        fs::path base_file = fs::path(data_dir) / "base.nt";
        if (fs::exists(base_file)) service->set_local_triples(read_triples(base_file.string()));
        return service;
    }

    std::vector<snes::Triple> union_dataset(const snes::Service& service) const {
        std::vector<snes::Triple> all;
        for (uint32_t dev : service.simulator().topology().device_ids) {
            fs::path file = fs::path(data_dir) / (std::to_string(dev) + ".nt");
            if (!fs::exists(file)) continue;
            for (auto& t : read_triples(file.string())) all.push_back(t);
        }
        fs::path base_file = fs::path(data_dir) / "base.nt";
        if (fs::exists(base_file))
            for (auto& t : read_triples(base_file.string())) all.push_back(t);
        return all;
    }
};

int cmd_serve(const ServiceArgs& args, const std::string& host, int port) {
    auto service = args.make_service();
    snes::EndpointServer server(*service);
    std::cerr << "listening on http://" << host << ":" << port << "/sparql\n";
    return server.listen(host, port) ? 0 : 1;
}

int cmd_run(const ServiceArgs& args, const std::string& query_file, bool trace, bool oracle) {
    auto service = args.make_service();
    std::string query = read_file(query_file);
    snes::ResultTable table = service->execute(query);
    std::cout << snes::table_to_sparql_json(table).dump(2) << "\n";
    if (trace)
        for (const auto& e : service->simulator().trace()) std::cerr << snes::trace_line(e) << "\n";
    if (oracle) {
        std::vector<snes::Triple> all = args.union_dataset(*service);
        snes::ResultTable expected = snes::eval_reference(all, snes::parse_query(query));
        bool match = snes::tables_equal(table, expected);
        std::cerr << "oracle: " << (match ? "MATCH" : "MISMATCH") << " (" << expected.rows.size()
                  << " reference rows; external HTTP sources are not included)\n";
        return match ? 0 : 3;
    }
    return 0;
}

int cmd_bench_hash(const std::string& corpus_file, const std::string& alg_name) {
    std::ifstream in(corpus_file);
    if (!in) throw snes::Error(snes::Errc::IoError, "cannot open " + corpus_file);
    std::vector<std::string> corpus;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) corpus.push_back(line);

    std::vector<snes::HashAlgorithm> algs;
    if (alg_name == "all") {
        algs.assign(snes::kAllHashAlgorithms.begin(), snes::kAllHashAlgorithms.end());
    } else {
        auto a = snes::hash_algorithm_from_name(alg_name);
        if (!a) {
            std::cerr << "unknown algorithm '" << alg_name << "'; known:";
            for (auto x : snes::kAllHashAlgorithms) std::cerr << " " << snes::hash_algorithm_name(x);
            std::cerr << "\n";
            return 2;
        }
        algs.push_back(*a);
    }
    std::printf("%-15s %12s %12s %12s %14s\n", "algorithm", "inputs", "hashes", "collisions",
                "elems/hash s2");
    for (auto a : algs) {
        snes::CollisionReport r = snes::collision_report(a, corpus);
        std::printf("%-15s %12llu %12llu %12llu %14.3e\n", snes::hash_algorithm_name(a),
                    (unsigned long long)r.distinct_inputs, (unsigned long long)r.distinct_hashes,
                    (unsigned long long)r.collisions, r.variance_per_hash);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SPARQL endpoint over a simulated embedded network"};
    app.require_subcommand(1);

    ServiceArgs serve_args, run_args;
    std::string host = "0.0.0.0";
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "run the SPARQL HTTP endpoint");
    serve_args.attach(serve);
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "bind port");

    std::string query_file;
    bool trace = false, oracle = false;
    auto* run = app.add_subcommand("run", "execute one query file");
    run_args.attach(run);
    run->add_option("--query", query_file, "SPARQL query file")->required();
    run->add_flag("--trace", trace, "print the message trace to stderr");
    run->add_flag("--oracle", oracle, "compare against the reference evaluator");

    std::string corpus_file, alg_name = "all";
    auto* bench = app.add_subcommand("bench-hash", "collision statistics over a corpus");
    bench->add_option("--corpus", corpus_file, "file with one string per line")->required();
    bench->add_option("--alg", alg_name, "algorithm name or 'all'");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) return cmd_serve(serve_args, host, port);
        if (*run) return cmd_run(run_args, query_file, trace, oracle);
        if (*bench) return cmd_bench_hash(corpus_file, alg_name);
    } catch (const snes::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
