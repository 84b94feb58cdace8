#pragma once

#include <catch_amalgamated.hpp>

#include <string>

#include "certens/core.hpp"

template <>
struct Catch::StringMaker<certens::CertOutput> {
    static std::string convert(const certens::CertOutput& o)
    {
        return "(" + std::to_string(o.label.value) + "," + (o.cert ? "1" : "0") + ")";
    }
};

template <>
struct Catch::StringMaker<certens::Label> {
    static std::string convert(const certens::Label& l) { return "label " + std::to_string(l.value); }
};
