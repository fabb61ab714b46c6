from swsearch.errors     import *
from swsearch.base       import *
from swsearch.decorators import *
from swsearch.validation import *
from swsearch.repr       import *
from swsearch.file       import *
from swsearch.seqio      import *
from swsearch.scoring    import *
from swsearch.kernels    import *
from swsearch.alignment  import *
from swsearch.scheduler  import *
from swsearch.synthetic  import *
from swsearch.bench      import *
from swsearch.cli        import run, cli_entry
