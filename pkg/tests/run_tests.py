#!/usr/bin/env python3
"""
fedseq-lab 统一测试运行器

按目录分组调用 pytest：unit / service / api / experiments / all
"""

import sys
import subprocess
import argparse
from pathlib import Path

# 添加项目根目录到Python路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

SUITES = {
    "unit": ("单元测试", ["tests/unit_tests"]),
    "service": ("服务测试", ["tests/service_tests"]),
    "api": ("桩服务与LLM视图测试", ["tests/api_tests"]),
    # 方向性实验默认被 pytest.ini 排除，这里显式选中
    "experiments": ("方向性实验", ["-m", "slow", "tests/experiment_tests"]),
}


def run_suite(name: str, extra=None) -> bool:
    """运行一组测试，返回是否全部通过"""
    title, args = SUITES[name]
    print(f"🧪 运行{title}...")
    try:
        result = subprocess.run(
            [sys.executable, "-m", "pytest", *args, *(extra or [])],
            cwd=project_root, capture_output=False,
        )
        return result.returncode == 0
    except Exception as e:
        print(f"❌ {title}运行失败: {e}")
        return False


def run_all_tests(extra=None) -> bool:
    """运行除方向性实验以外的所有测试"""
    print("🚀 运行所有测试...")

    results = [(SUITES[name][0], run_suite(name, extra)) for name in ("unit", "service", "api")]

    print("\n" + "=" * 50)
    print("📊 测试结果总结")
    print("=" * 50)

    for test_name, success in results:
        status = "✅ 通过" if success else "❌ 失败"
        print(f"{test_name}: {status}")

    all_passed = all(result[1] for result in results)

    if all_passed:
        print("\n🎉 所有测试通过！")
    else:
        print("\n💥 部分测试失败")

    return all_passed


def main():
    """主函数"""
    parser = argparse.ArgumentParser(description="fedseq-lab 测试运行器")
    parser.add_argument("command", choices=[*SUITES, "all"], help="测试类型")
    parser.add_argument("-k", dest="keyword", help="只运行名字匹配的测试（透传给 pytest -k）")

    args = parser.parse_args()
    extra = ["-k", args.keyword] if args.keyword else None

    if args.command == "all":
        success = run_all_tests(extra)
    else:
        success = run_suite(args.command, extra)

    return 0 if success else 1


if __name__ == "__main__":
    try:
        exit_code = main()
        sys.exit(exit_code)
    except KeyboardInterrupt:
        print("\n⏹️  测试被用户中断")
        sys.exit(1)
