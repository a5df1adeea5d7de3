#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "companion/service_api.hpp"

using namespace companion;
using nlohmann::json;

namespace {

struct Flags {
    std::string config;
    json overrides = json::object();
};

template <typename T>
void flag(CLI::App* cmd, Flags& flags, const std::string& name, const std::string& key, const std::string& help)
{
    cmd->add_option_function<T>(
        name, [&flags, key](const T& value) { flags.overrides[key] = value; }, help);
}

void add_config_flags(CLI::App* cmd, Flags& flags)
{
    cmd->add_option("--config", flags.config, "JSON configuration file");
    flag<std::string>(cmd, flags, "--data-dir", "data_dir", "Directory for indexes, journals and report hashes");
    flag<std::string>(cmd, flags, "--corpus-dir", "corpus_dir", "Directory of Markdown/HTML chapters");
    flag<std::string>(cmd, flags, "--roster", "roster", "Provider roster JSON");
    flag<double>(cmd, flags, "--pass-threshold", "pass_threshold", "Passing score in (0, 1]");
    flag<std::size_t>(cmd, flags, "--badge-interval", "badge_interval", "Passing attempts per badge");
    flag<std::size_t>(cmd, flags, "--cache-threshold", "cache_threshold", "Stored quizzes per section before reuse only");
    flag<std::size_t>(cmd, flags, "--token-budget", "token_budget", "Context token limit");
    flag<std::size_t>(cmd, flags, "--required-sections", "required_sections", "Sections passed to complete a chapter");
    flag<std::string>(cmd, flags, "--time-zone", "time_zone", "UTC or a fixed offset such as +02:00");
    flag<std::string>(cmd, flags, "--secret-env", "secret_env", "Environment variable holding the report secret");
    flag<std::uint64_t>(cmd, flags, "--seed", "seed", "Seed for quiz mixing and report ids");
}

EngineConfig resolve(const Flags& flags)
{
    std::optional<std::filesystem::path> file;
    if (!flags.config.empty())
        file = flags.config;
    return resolve_config(file, [](const char* name) { return std::getenv(name); }, flags.overrides);
}

std::optional<std::string> secret_from(const EngineConfig& config)
{
    const char* s = std::getenv(config.secret_env.c_str());
    if (!s || !*s)
        return std::nullopt;
    return std::string(s);
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::io_error, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Textbook learning companion engine"};
    app.require_subcommand(1);
    int exit_code = 0;

    Flags ingest_flags;
    std::string ingest_dir;
    auto* ingest = app.add_subcommand("ingest", "Index a corpus directory and persist the indexes");
    ingest->add_option("directory", ingest_dir, "Corpus directory of Markdown/HTML chapters")->required();
    add_config_flags(ingest, ingest_flags);

    Flags serve_flags;
    auto* serve = app.add_subcommand("serve", "Start the HTTP service");
    add_config_flags(serve, serve_flags);
    flag<std::string>(serve, serve_flags, "--host", "host", "Bind address");
    flag<int>(serve, serve_flags, "--port", "port", "Port");

    Flags verify_flags;
    std::string verify_path;
    auto* verify = app.add_subcommand("verify-report", "Verify an exported progress report");
    verify->add_option("file", verify_path, "Report file")->required();
    add_config_flags(verify, verify_flags);

    std::string scenario_path;
    auto* cost = app.add_subcommand("estimate-cost", "Deployment cost for a usage scenario");
    cost->add_option("scenario-json", scenario_path, "Scenario JSON file")->required();

    Flags export_flags;
    std::string export_learner;
    std::string export_out;
    auto* export_cmd = app.add_subcommand("export-report", "Issue an attested progress report");
    export_cmd->add_option("learner-id", export_learner, "Learner id")->required();
    export_cmd->add_option("--out", export_out, "Write the report here instead of stdout");
    add_config_flags(export_cmd, export_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            ingest_flags.overrides["corpus_dir"] = ingest_dir;
            const auto config = resolve(ingest_flags);
            if (config.data_dir.empty())
                throw Error(Errc::config_error, "ingest needs a data directory (--data-dir or ENGINE_DATA_DIR)");
            const auto corpus = ingest_directory(config.corpus_dir);
            const auto written = write_indexes(corpus, config.data_dir / "index");
            std::size_t sections = 0;
            for (const auto& c : corpus.chapters())
                sections += c.sections().size();
            std::cout << "indexed " << corpus.chapters().size() << " chapters, " << sections << " sections\n";
            for (const auto& p : written)
                std::cout << p.string() << '\n';
        } else if (*serve) {
            const auto config = resolve(serve_flags);
            if (config.roster.empty())
                throw Error(Errc::config_error, "serve needs a provider roster (--roster or ENGINE_ROSTER)");
            HttpJsonTransport transport;
            EngineDeps deps;
            deps.transport = &transport;
            deps.roster = load_roster(config.roster);
            deps.secret = secret_from(config);
            Engine engine(config, load_corpus(config), std::move(deps));
            std::cerr << "listening on " << config.host << ":" << config.port << '\n';
            run_server(engine, config.host, config.port);
        } else if (*verify) {
            const auto config = resolve(verify_flags);
            const auto secret = secret_from(config);
            if (!secret)
                throw Error(Errc::missing_secret, "environment variable " + config.secret_env + " is not set");
            if (config.data_dir.empty())
                throw Error(Errc::config_error, "verify-report needs the data directory holding report hashes");
            JsonFileHashStore store(config.data_dir / "report_hashes.json");
            const auto v = verify_report(slurp(verify_path), *secret, store);
            if (v.verdict == Verdict::Verified) {
                std::cout << "Verified " << v.report_id << '\n';
            } else {
                std::cout << "NotVerified: " << v.diagnostic << '\n';
                exit_code = 1;
            }
        } else if (*cost) {
            auto doc = json::parse(slurp(scenario_path), nullptr, false);
            if (doc.is_discarded())
                throw Error(Errc::invalid_argument, scenario_path + " is not valid JSON");
            const auto b = estimate_cost(cost_scenario_from_json(doc));
            std::printf("total_calls %.0f\nin_cost %.2f\nout_cost %.2f\ntotal_cost %.2f\n", b.total_calls, b.in_cost,
                        b.out_cost, b.total_cost);
        } else if (*export_cmd) {
            const auto config = resolve(export_flags);
            EngineDeps deps;
            deps.secret = secret_from(config);
            Engine engine(config, load_corpus(config), std::move(deps));
            const auto report = engine.issue_report(export_learner);
            if (export_out.empty()) {
                std::cout << report.file();
            } else {
                std::ofstream out(export_out, std::ios::binary | std::ios::trunc);
                out << report.file();
                if (!out)
                    throw Error(Errc::io_error, "cannot write " + export_out);
                std::cerr << "report " << report.report_id << " written to " << export_out << '\n';
            }
        }
    } catch (const Error& e) {
        std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return exit_code;
}
