from cli.base import PipelineCommand, as_json
from cli.bench import BenchConfig, run_bench
from cli.forms import BenchForm


class Command(PipelineCommand):
    help = "Measure rendering throughput in frames per second."
    form_class = BenchForm

    def add_options(self, parser):
        parser.add_argument('--preset')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--frames', type=int)
        parser.add_argument('--resolution', help="WIDTHxHEIGHT")
        parser.add_argument('--blocks', type=int, help="synthetic city size in blocks per side")
        parser.add_argument('--no-culling', action='store_false', dest='culling', default=None)
        parser.add_argument('--lod', action='store_true', default=None)
        parser.add_argument('--no-lod', action='store_false', dest='lod', default=None)
        parser.add_argument('--verify', action='store_true', default=None,
                            help="also check culled renders against unculled ones (LOD off)")
        parser.add_argument('--bands', type=int)

    def run(self, cleaned):
        return as_json(run_bench(BenchConfig.from_form(cleaned)))
