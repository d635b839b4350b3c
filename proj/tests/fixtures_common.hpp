#pragma once

// Shared grid fixtures: a four-section supply-chain sheet and a miniature
// weekly-production sheet (2 products x 15 week columns, 13 inside Q1 2025).

#include "tableqa/grid.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <unistd.h>
#include <vector>

namespace fixtures {

using OptRow = std::vector<std::optional<std::string>>;

inline const std::string& english_note() {
    static const std::string note =
        "Note about train and sea transport. When we inform forwarder about pick up date "
        "he needs time to book sailing date. It can be from 1 to 3 weeks from when we "
        "schedule pick till actual sailing date. This is not always certen so it is "
        "importan to know delivery date to our warehouse on time.";
    return note;
}

inline const std::string& chinese_note() {
    static const std::string note =
        "关于火车和海运的说明。当我"
        "们通知货运代理提货日期时，"
        "他需要时间预订航行日期。这"
        "并不总是确定的，因此及时知"
        "道交货日期到我们的仓库非常"
        "重要。";
    return note;
}

inline tqa::GridDocument case_a_grid() {
    std::vector<OptRow> rows = {
        // section 1: inventory snapshot
        {"P/N", "Description", "Stock"},
        {"C01", "Painted Upper Back Cover", "4444"},
        {"C02", "Urgent Air freight arrival", std::nullopt},
        {"C03", "Train arrival", std::nullopt},
        {"C04", "Sea freight arrival", std::nullopt},
        {"C05", "Covarage", std::nullopt},
        {},
        // section 2: weekly forecast, stacked week/date headers
        {std::nullopt, "W16", "W17", "W18", "W19"},
        {std::nullopt, "14-Apr-2025", "21-Apr-2025", "28-Apr-2025", "5-May-2025"},
        {"STOCK", "4444", "4444", "4444", "4444"},
        {"Weekly Demand", std::nullopt, std::nullopt, std::nullopt, std::nullopt},
        {"Inbound Logistics", "0", "3434", std::nullopt, "2323"},
        {"Coverage", "0", "-1010", "-5454", "-7575"},
        {},
        // section 3: sea & rail shipment plan
        {std::nullopt, "W09", "W10", "W11", "W12", "W13", "W16", "W18"},
        {std::nullopt, "23-Feb-2021", "3-Mar-2025", "17-Mar-2025", "24-Mar-2025",
         "24-Mar-2025", "14-Apr-2025", "28-Apr-2025"},
        {"Sea order", "600", "600", "600", "600", "600", "600", "600"},
        {"Status", "Delivered", "Plan to be delivered", "Confirmed departure",
         "Confirmed Milsped", "Confirmed Milsped",
         "Pick up ongoing materials are in the warehouse", "Not delivered Train"},
        {},
        // section 4: lead-time note block with a merged banner
        {"SHIPPING PLAN SEA AND TRAIN", std::nullopt, std::nullopt},
        {"GYGUYB-9", "Painted Upper Back Cover", "Sea order"},
        {english_note(), chinese_note(), std::nullopt},
    };
    return tqa::make_grid("case_a", "Shipping Plan Sea and Train", std::move(rows),
                          {tqa::MergeRegion{19, 0, 1, 3}},
                          {{"ingested_at", "2025-08-01T00:00:00Z"},
                           {"filename", "case_a.xlsx"},
                           {"sheet", "Sheet1"}});
}

inline std::vector<std::string> case_b_week_labels() {
    return {"Dec 23 2024", "Jan 06 2025", "Jan 13 2025", "Jan 20 2025", "Jan 27 2025",
            "Feb 03 2025", "Feb 10 2025", "Feb 17 2025", "Feb 24 2025", "Mar 03 2025",
            "Mar 10 2025", "Mar 17 2025", "Mar 24 2025", "Mar 31 2025", "Apr 07 2025"};
}

// 13 in-range values per product: MY gets 1..13, HLD gets 14..26; the two
// out-of-range decoy columns carry values that would corrupt the sum.
inline tqa::GridDocument case_b_grid() {
    OptRow header = {"Product"};
    for (const auto& w : case_b_week_labels()) header.push_back(w);
    OptRow my = {"MY", "500"};
    for (int i = 1; i <= 13; ++i) my.push_back(std::to_string(i));
    my.push_back("600");
    OptRow hld = {"HLD", "700"};
    for (int i = 14; i <= 26; ++i) hld.push_back(std::to_string(i));
    hld.push_back("800");
    return tqa::make_grid("case_b", "YF Seat Weekly Production Statistics on Dec 30, 2024",
                          {header, my, hld}, {},
                          {{"ingested_at", "2025-01-02T00:00:00Z"},
                           {"filename", "case_b.xlsx"}});
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag = "tqa_tmp") {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
};

} // namespace fixtures
