#!/usr/bin/env python3
"""
Test runner for OfficeWatt that runs each suite in its own pytest process.
Pass --fast to skip the week-long building runs.
"""
import subprocess
import sys
import time

# Define test suites
TEST_SUITES = {
    "Building plan": ["tests/test_plan.py"],
    "Population": ["tests/test_population.py"],
    "Random streams": ["tests/test_random_streams.py"],
    "Behaviour": ["tests/test_behavior.py"],
    "Social network": ["tests/test_social.py"],
    "Metering": ["tests/test_metering.py"],
    "Engine": ["tests/test_engine.py"],
    "Experiments": ["tests/test_experiments.py"],
    "CLI": ["tests/test_cli.py"],
}


def run_suite(test_path, fast):
    """Run a single suite and return success status."""
    command = ["pytest", test_path, "-q", "--tb=short"]
    if fast:
        command += ["-m", "not slow"]
    result = subprocess.run(command, capture_output=True, text=True)
    # 5 means every test was deselected
    return result.returncode in (0, 5), result.stdout, result.stderr


def main():
    """Run all suites and print summary."""
    fast = "--fast" in sys.argv[1:]
    print("OfficeWatt Test Suite" + (" (fast)" if fast else ""))
    print("=" * 60)

    total = 0
    passed = 0
    failed = []
    started = time.time()

    for suite_name, paths in TEST_SUITES.items():
        print(f"\n{suite_name}:")
        print("-" * 40)

        for path in paths:
            total += 1
            print(f"  Running {path}...", end="", flush=True)

            success, stdout, stderr = run_suite(path, fast)

            if success:
                passed += 1
                print(" ✓ PASSED")
            else:
                failed.append(path)
                print(" ✗ FAILED")
                tail = (stdout or stderr).strip().splitlines()[-15:]
                for line in tail:
                    print(f"    {line}")

    # Print summary
    print("\n" + "=" * 60)
    print("Test Summary")
    print("=" * 60)
    print(f"Suites: {total}")
    print(f"Passed: {passed}")
    print(f"Failed: {len(failed)}")
    print(f"Elapsed: {time.time() - started:.1f}s")

    if failed:
        print("\nFailed suites:")
        for path in failed:
            print(f"  - {path}")

    return len(failed)


if __name__ == "__main__":
    sys.exit(main())
