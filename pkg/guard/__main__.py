"""
Guard Command Line Interface Setup
"""
import argparse
import sys
from guard.harness.runner import SUBCOMMANDS, run

DESCRIPTIONS = {
    'squeeze': 'Train the teacher with the distillation method\'s objective.',
    'recover': 'Synthesize inputs per class against the trained teacher.',
    'relabel': 'Replace the recovered labels by teacher soft labels.',
    'distill-dc': 'Distill by gradient matching (dc-guard or dc-plain).',
    'train': 'Train a model on the real training split.',
    'attack': 'Attack a trained model on the real test split.',
    'eval': 'Train students on a synthetic set and measure their robustness.',
    'profile': 'Profile the input-Hessian spectrum of a trained model.',
    'verify-theory': 'Check the adversarial-loss bounds numerically.',
    'bench-overhead': 'Time plain, GUARD and adversarial training iterations.',
    'report': 'Aggregate prior eval runs into robustness and ablation tables.',
}


def main(argv=None):
    # Argparse setup
    parser = argparse.ArgumentParser(prog='guard', description='Robust Dataset Distillation Tools.')
    subparsers = parser.add_subparsers(dest='subcommand')
    for name in SUBCOMMANDS:
        subparser = subparsers.add_parser(name, help=DESCRIPTIONS[name])
        subparser.add_argument('-c', '--config', help='Path to JSON config file.', default=None)
        subparser.add_argument('-s', '--set', help='Config override key.path=value (repeatable).',
                               action='append', default=[], dest='overrides')
        subparser.add_argument('-o', '--out', help='Output directory (overrides output_dir).', default=None)
        subparser.add_argument('-q', '--quiet', help='No progress bars or status lines.', action='store_true')

    # Parse initial args
    args = parser.parse_args(argv)
    if args.subcommand is None:
        parser.print_help()
        return 2

    # Run proper subcommand
    return run(args.subcommand, args.config, args.overrides, args.out, verbose=not args.quiet)


if __name__ == '__main__':
    sys.exit(main())
