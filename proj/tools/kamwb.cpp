#include "commands.hpp"

#include "kamwb/errors.hpp"

#include <iostream>
#include <string>

int main(int argc, char** argv)
{
    CLI::App app{"kamwb: KAM workbench for almost periodic perturbations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", KAMWB_VERSION);
    kamwb::cli::register_commands(app);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const kamwb::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (e.is_gate())
            return 3;
        std::string kind = e.kind();
        bool validation = kind == "ConfigError" || kind == "NoCoveringSet" || kind == "CapTooLarge" ||
                          kind == "OriginExcluded" || kind == "DomainViolation" || kind == "SupportOverflow";
        return validation ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
